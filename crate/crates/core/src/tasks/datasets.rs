//! Loaders for the three evaluation datasets.
//!
//! * emotion: `text<TAB>7 binary columns[<TAB>7 intensities in [0, 1]]`, optional header row
//! * sexism: `text<TAB>raw label`
//! * NER: CoNLL two-column `word tag`, blank line between sentences

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::ner::{align_first_subwords, bio_decode, BioMode, NerExample};
use super::{TaskError, EMOTIONS, NER_TYPES};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmotionExample {
    pub text: String,
    pub labels: [u8; 7],
    pub intensities: Option<[f64; 7]>,
}

impl EmotionExample {
    /// Intensities thresholded at `threshold`, if present.
    pub fn thresholded(&self, threshold: f64) -> Option<[u8; 7]> {
        self.intensities.map(|xs| xs.map(|x| u8::from(x >= threshold)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SexismLabel {
    SexistDirect,
    SexistDescriptive,
    SexistReporting,
    NonSexistOffensive,
    NonSexistNonOffensive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SexismBinary {
    Sexist,
    NonSexist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SexismKind {
    Direct,
    Descriptive,
    Reporting,
}

impl SexismLabel {
    pub const ALL: [SexismLabel; 5] = [
        SexismLabel::SexistDirect,
        SexismLabel::SexistDescriptive,
        SexismLabel::SexistReporting,
        SexismLabel::NonSexistOffensive,
        SexismLabel::NonSexistNonOffensive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SexismLabel::SexistDirect => "sexist direct",
            SexismLabel::SexistDescriptive => "sexist descriptive",
            SexismLabel::SexistReporting => "sexist reporting",
            SexismLabel::NonSexistOffensive => "non-sexist offensive",
            SexismLabel::NonSexistNonOffensive => "non-sexist non-offensive",
        }
    }

    pub fn binary(self) -> SexismBinary {
        match self.kind() {
            Some(_) => SexismBinary::Sexist,
            None => SexismBinary::NonSexist,
        }
    }

    pub fn kind(self) -> Option<SexismKind> {
        match self {
            SexismLabel::SexistDirect => Some(SexismKind::Direct),
            SexismLabel::SexistDescriptive => Some(SexismKind::Descriptive),
            SexismLabel::SexistReporting => Some(SexismKind::Reporting),
            _ => None,
        }
    }
}

impl SexismBinary {
    pub fn as_str(self) -> &'static str {
        match self {
            SexismBinary::Sexist => "sexist",
            SexismBinary::NonSexist => "non-sexist",
        }
    }
}

impl SexismKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SexismKind::Direct => "direct",
            SexismKind::Descriptive => "descriptive",
            SexismKind::Reporting => "reporting",
        }
    }
}

impl FromStr for SexismLabel {
    type Err = TaskError;

    /// Case-insensitive; `_` counts as a space and runs of spaces collapse.
    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let canon = raw.to_lowercase().replace('_', " ");
        let canon = canon.split_whitespace().collect::<Vec<_>>().join(" ");
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == canon)
            .ok_or_else(|| TaskError::UnknownLabel(raw.to_string()))
    }
}

pub fn derive_sli_labels(raw_label: &str) -> Result<(SexismBinary, Option<SexismKind>), TaskError> {
    let label: SexismLabel = raw_label.parse()?;
    Ok((label.binary(), label.kind()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SexismExample {
    pub text: String,
    pub raw_label: SexismLabel,
    pub binary_label: SexismBinary,
    pub threeway_label: Option<SexismKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    RedV2,
    CoRoSeOf,
    Ner,
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "red_v2" => Ok(TaskKind::RedV2),
            "coroseof" => Ok(TaskKind::CoRoSeOf),
            "ner" => Ok(TaskKind::Ner),
            other => Err(format!("unknown task {other:?} (expected red_v2, coroseof or ner)")),
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::RedV2 => "red_v2",
            TaskKind::CoRoSeOf => "coroseof",
            TaskKind::Ner => "ner",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TaskExample {
    Emotion(EmotionExample),
    Sexism(SexismExample),
    Ner(NerExample),
}

fn malformed(row: usize, reason: impl Into<String>) -> TaskError {
    TaskError::MalformedRow {
        row,
        reason: reason.into(),
    }
}

fn is_emotion_header(fields: &[&str]) -> bool {
    fields.len() >= 8 && fields[1..8].iter().zip(EMOTIONS).all(|(f, e)| f.trim().eq_ignore_ascii_case(e))
}

pub fn read_red_v2<R: BufRead>(reader: R) -> Result<Vec<EmotionExample>, TaskError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if row == 1 && is_emotion_header(&fields) {
            continue;
        }
        if fields.len() != 8 && fields.len() != 15 {
            return Err(malformed(row, format!("{} columns, expected 8 or 15", fields.len())));
        }
        let text = fields[0].trim();
        if text.is_empty() {
            return Err(malformed(row, "empty text"));
        }
        let mut labels = [0u8; 7];
        for (slot, f) in labels.iter_mut().zip(&fields[1..8]) {
            *slot = match f.trim() {
                "0" => 0,
                "1" => 1,
                other => return Err(malformed(row, format!("label {other:?} is not 0 or 1"))),
            };
        }
        let intensities = if fields.len() == 15 {
            let mut xs = [0f64; 7];
            for (slot, f) in xs.iter_mut().zip(&fields[8..]) {
                let x: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| malformed(row, format!("intensity {f:?} is not a number")))?;
                if !(0.0..=1.0).contains(&x) {
                    return Err(malformed(row, format!("intensity {x} outside [0, 1]")));
                }
                *slot = x;
            }
            Some(xs)
        } else {
            None
        };
        out.push(EmotionExample {
            text: text.to_string(),
            labels,
            intensities,
        });
    }
    Ok(out)
}

pub fn read_coroseof<R: BufRead>(reader: R) -> Result<Vec<SexismExample>, TaskError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (text, label) = line
            .rsplit_once('\t')
            .ok_or_else(|| malformed(row, "expected text<TAB>label"))?;
        if text.trim().is_empty() {
            return Err(malformed(row, "empty text"));
        }
        let raw_label: SexismLabel = match label.parse() {
            Ok(l) => l,
            Err(_) if row == 1 && label.trim().eq_ignore_ascii_case("label") => continue,
            Err(e) => return Err(e),
        };
        out.push(SexismExample {
            text: text.trim().to_string(),
            raw_label,
            binary_label: raw_label.binary(),
            threeway_label: raw_label.kind(),
        });
    }
    Ok(out)
}

/// Words and their BIO tags.
pub type ConllSentence = (Vec<String>, Vec<String>);

/// Reads CoNLL `word tag` sentences and validates their tags.
///
/// `InvalidBio` and `UnknownLabel` errors carry the 1-based line number.
pub fn read_conll<R: BufRead>(reader: R, mode: BioMode) -> Result<Vec<ConllSentence>, TaskError> {
    let mut out = Vec::new();
    let mut words: Vec<String> = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let mut rows: Vec<usize> = Vec::new();

    let mut flush = |words: &mut Vec<String>, tags: &mut Vec<String>, rows: &mut Vec<usize>| -> Result<(), TaskError> {
        if words.is_empty() {
            return Ok(());
        }
        if let Err(TaskError::InvalidBio { at, tag }) = bio_decode(tags, mode) {
            return Err(TaskError::InvalidBio { at: rows[at], tag });
        }
        out.push((std::mem::take(words), std::mem::take(tags)));
        rows.clear();
        Ok(())
    };

    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            flush(&mut words, &mut tags, &mut rows)?;
            continue;
        }
        if line.starts_with("-DOCSTART-") {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(word), Some(tag), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(malformed(row, "expected `word tag`"));
        };
        if let Some((_, kind)) = tag.split_once('-') {
            if !NER_TYPES.contains(&kind) {
                return Err(TaskError::UnknownLabel(format!("{tag} (line {row})")));
            }
        }
        words.push(word.to_string());
        tags.push(tag.to_string());
        rows.push(row);
    }
    flush(&mut words, &mut tags, &mut rows)?;
    Ok(out)
}

/// [`read_conll`] plus first-subword alignment against `vocab`.
pub fn read_ner<R: BufRead>(reader: R, vocab: &Vocabulary, mode: BioMode) -> Result<Vec<NerExample>, TaskError> {
    Ok(read_conll(reader, mode)?
        .into_iter()
        .map(|(words, tags)| {
            let first_subword_index = align_first_subwords(&words, vocab).first_subword_index;
            NerExample {
                words,
                tags,
                first_subword_index,
            }
        })
        .collect())
}

/// Loads a dataset file; NER files need `vocab` for subword alignment.
pub fn load_task_dataset(
    path: &Path,
    task: TaskKind,
    vocab: Option<&Vocabulary>,
    mode: BioMode,
) -> Result<Vec<TaskExample>, TaskError> {
    let reader = BufReader::new(File::open(path)?);
    Ok(match task {
        TaskKind::RedV2 => read_red_v2(reader)?.into_iter().map(TaskExample::Emotion).collect(),
        TaskKind::CoRoSeOf => read_coroseof(reader)?.into_iter().map(TaskExample::Sexism).collect(),
        TaskKind::Ner => {
            let vocab = vocab.ok_or(TaskError::VocabularyRequired)?;
            read_ner(reader, vocab, mode)?.into_iter().map(TaskExample::Ner).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::toy_vocab;

    #[test]
    fn sli_labels() {
        assert_eq!(
            derive_sli_labels("sexist reporting").unwrap(),
            (SexismBinary::Sexist, Some(SexismKind::Reporting))
        );
        assert_eq!(derive_sli_labels("non-sexist offensive").unwrap(), (SexismBinary::NonSexist, None));
        assert_eq!(derive_sli_labels("Sexist_Direct").unwrap().1, Some(SexismKind::Direct));
        let with_kind = SexismLabel::ALL
            .iter()
            .filter(|l| derive_sli_labels(l.as_str()).unwrap().1.is_some())
            .count();
        assert_eq!(with_kind, 3);
        assert!(matches!(derive_sli_labels("sexist"), Err(TaskError::UnknownLabel(_))));
    }

    #[test]
    fn red_v2_rows() {
        let data = "text\tanger\tfear\thappiness\tsadness\tsurprise\ttrust\tneutral\n\
                    Sunt furios azi\t1\t0\t0\t0\t0\t0\t0\n\
                    Ce zi frumoasa\t0\t0\t1\t0\t0\t0\t0\t0\t0\t0.9\t0.1\t0\t0.2\t0\n";
        let ex = read_red_v2(data.as_bytes()).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].labels, [1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(ex[1].thresholded(0.5), Some([0, 0, 1, 0, 0, 0, 0]));
        let bad = "x\t1\t0\t2\t0\t0\t0\t0\n";
        assert!(matches!(read_red_v2(bad.as_bytes()), Err(TaskError::MalformedRow { row: 1, .. })));
        let short = "ok\t1\t0\t0\t0\t0\t0\t0\nx\t1\t0\n";
        assert!(matches!(read_red_v2(short.as_bytes()), Err(TaskError::MalformedRow { row: 2, .. })));
        let range = "x\t1\t0\t0\t0\t0\t0\t0\t1.5\t0\t0\t0\t0\t0\t0\n";
        assert!(read_red_v2(range.as_bytes()).is_err());
    }

    #[test]
    fn coroseof_rows() {
        let ex = read_coroseof("text\tlabel\nFemeile la cratita\tsexist direct\n".as_bytes()).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].binary_label, SexismBinary::Sexist);
        assert_eq!(ex[0].threeway_label, Some(SexismKind::Direct));
        assert!(matches!(
            read_coroseof("a\tneutral\n".as_bytes()),
            Err(TaskError::UnknownLabel(_))
        ));
    }

    #[test]
    fn ner_sentences() {
        let v = toy_vocab(&["Ion", "merge", "la", "Cluj"]);
        let data = "-DOCSTART- O\n\nIon B-PER\nmerge O\nla O\nCluj B-LOC\n\n\nCluj B-LOC\n";
        let ex = read_ner(data.as_bytes(), &v, BioMode::Strict).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].first_subword_index, vec![1, 2, 3, 4]);
        assert_eq!(ex[1].tags, vec!["B-LOC"]);

        let orphan = "Ion O\nPopescu I-PER\n";
        assert!(matches!(
            read_ner(orphan.as_bytes(), &v, BioMode::Strict),
            Err(TaskError::InvalidBio { at: 2, .. })
        ));
        assert_eq!(read_ner(orphan.as_bytes(), &v, BioMode::Repair).unwrap().len(), 1);
        assert!(matches!(
            read_ner("Ion B-XYZ\n".as_bytes(), &v, BioMode::Strict),
            Err(TaskError::UnknownLabel(_))
        ));
        assert!(read_ner("Ion\n".as_bytes(), &v, BioMode::Strict).is_err());
    }

    #[test]
    fn task_names() {
        assert_eq!("coroseof".parse::<TaskKind>().unwrap(), TaskKind::CoRoSeOf);
        assert!("sts".parse::<TaskKind>().is_err());
    }
}
