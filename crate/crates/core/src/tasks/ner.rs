use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::metrics::{ClassScores, MetricReport};
use super::TaskError;
use crate::scalar::Scalar;
use crate::vocab::{wordpiece_tokenize, Vocabulary, CLS, UNK};

/// How orphan `I-` tags are handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BioMode {
    /// Orphan `I-X` is an error.
    #[default]
    Strict,
    /// Orphan `I-X` opens a new `X` span.
    Repair,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EntitySpan {
    pub kind: String,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
}

enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

fn parse_tag(tag: &str) -> Option<Tag<'_>> {
    if tag == "O" {
        return Some(Tag::Outside);
    }
    let (prefix, kind) = tag.split_once('-')?;
    if kind.is_empty() {
        return None;
    }
    match prefix {
        "B" => Some(Tag::Begin(kind)),
        "I" => Some(Tag::Inside(kind)),
        _ => None,
    }
}

pub fn bio_decode<S: AsRef<str>>(tags: &[S], mode: BioMode) -> Result<Vec<EntitySpan>, TaskError> {
    let mut spans = Vec::new();
    let mut open: Option<(&str, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let parsed = parse_tag(tag).ok_or_else(|| TaskError::InvalidBio {
            at: i,
            tag: tag.to_string(),
        })?;
        let begin = match parsed {
            Tag::Inside(kind) if open.is_some_and(|(k, _)| k == kind) => continue,
            Tag::Inside(kind) if mode == BioMode::Repair => Some(kind),
            Tag::Inside(_) => {
                return Err(TaskError::InvalidBio {
                    at: i,
                    tag: tag.to_string(),
                })
            }
            Tag::Begin(kind) => Some(kind),
            Tag::Outside => None,
        };
        if let Some((kind, start)) = open.take() {
            spans.push(EntitySpan {
                kind: kind.to_string(),
                start,
                end: i,
            });
        }
        open = begin.map(|k| (k, i));
    }
    if let Some((kind, start)) = open {
        spans.push(EntitySpan {
            kind: kind.to_string(),
            start,
            end: tags.len(),
        });
    }
    Ok(spans)
}

/// Exact-span entity scores over aligned sentences: per type plus a micro total.
///
/// Scalars are `precision`, `recall` and `f1` of the micro total.
pub fn entity_f1<F: Scalar, S: AsRef<str>>(
    true_tags: &[Vec<S>],
    pred_tags: &[Vec<S>],
    mode: BioMode,
) -> Result<MetricReport<F>, TaskError> {
    if true_tags.len() != pred_tags.len() {
        return Err(TaskError::LengthMismatch {
            left: true_tags.len(),
            right: pred_tags.len(),
        });
    }
    let mut gold = BTreeSet::new();
    let mut pred = BTreeSet::new();
    for (s, (t, p)) in true_tags.iter().zip(pred_tags).enumerate() {
        if t.len() != p.len() {
            return Err(TaskError::LengthMismatch {
                left: t.len(),
                right: p.len(),
            });
        }
        gold.extend(bio_decode(t, mode)?.into_iter().map(|e| (s, e)));
        pred.extend(bio_decode(p, mode)?.into_iter().map(|e| (s, e)));
    }

    // kind -> (tp, gold, pred)
    let mut per_kind: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (_, e) in &gold {
        per_kind.entry(&e.kind).or_default().1 += 1;
    }
    for item in &pred {
        let entry = per_kind.entry(&item.1.kind).or_default();
        entry.2 += 1;
        if gold.contains(item) {
            entry.0 += 1;
        }
    }
    let scores = |tp: usize, g: usize, p: usize| {
        let precision = F::ratio(tp, p);
        let recall = F::ratio(tp, g);
        let f1 = if precision + recall == F::zero() {
            F::zero()
        } else {
            F::of(2.0) * precision * recall / (precision + recall)
        };
        (precision, recall, f1)
    };

    let mut report = MetricReport::new("ner");
    let tp = gold.intersection(&pred).count();
    let (p, r, f) = scores(tp, gold.len(), pred.len());
    report.set("precision", p).set("recall", r).set("f1", f);
    report.per_class = per_kind
        .into_iter()
        .map(|(kind, (tp, g, p))| {
            let (precision, recall, f1) = scores(tp, g, p);
            ClassScores {
                label: kind.to_string(),
                precision,
                recall,
                f1,
                support: g,
            }
        })
        .collect();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Alignment {
    /// `[CLS]` followed by the WordPiece pieces of every word.
    pub pieces: Vec<String>,
    pub first_subword_index: Vec<usize>,
}

/// Maps each word to the position of its first piece in the `[CLS]`-prefixed sequence.
pub fn align_first_subwords<S: AsRef<str>>(words: &[S], vocab: &Vocabulary) -> Alignment {
    let mut pieces = vec![CLS.to_string()];
    let mut first_subword_index = Vec::with_capacity(words.len());
    for word in words {
        first_subword_index.push(pieces.len());
        let word_pieces = wordpiece_tokenize(word.as_ref(), vocab);
        if word_pieces.is_empty() {
            pieces.push(UNK.to_string());
        } else {
            pieces.extend(word_pieces);
        }
    }
    Alignment {
        pieces,
        first_subword_index,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NerExample {
    pub words: Vec<String>,
    pub tags: Vec<String>,
    pub first_subword_index: Vec<usize>,
}
