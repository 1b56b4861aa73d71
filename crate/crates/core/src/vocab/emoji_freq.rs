use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::VocabError;
use crate::normalize::emoji_sequences;

/// Occurrence counts of emoji sequences in untranslated tweet text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmojiFrequencyTable {
    counts: BTreeMap<String, u64>,
}

impl EmojiFrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_text(&mut self, text: &str) {
        for seq in emoji_sequences(text) {
            *self.counts.entry(seq.to_string()).or_default() += 1;
        }
    }

    /// Commutative merge used by sharded counting.
    pub fn merge(mut self, other: Self) -> Self {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self.counts), other.counts)
        } else {
            (other.counts, std::mem::take(&mut self.counts))
        };
        for (k, v) in small {
            *big.entry(k).or_default() += v;
        }
        Self { counts: big }
    }

    pub fn get(&self, emoji: &str) -> u64 {
        self.counts.get(emoji).copied().unwrap_or(0)
    }

    pub fn total_distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Entries ranked by count descending, then code points ascending.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut entries: Vec<(&str, u64)> = self.counts.iter().map(|(k, &v)| (k.as_str(), v)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        entries
    }

    /// `emoji<TAB>count` lines, count-descending.
    pub fn write_report<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        for (emoji, count) in self.ranked() {
            writeln!(sink, "{emoji}\t{count}")?;
        }
        Ok(())
    }

    pub fn read_report<R: BufRead>(reader: R) -> Result<Self, VocabError> {
        let mut table = Self::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (emoji, count) = line.split_once('\t').ok_or(VocabError::MalformedLine(n + 1))?;
            let count: u64 = count.trim().parse().map_err(|_| VocabError::MalformedLine(n + 1))?;
            if count == 0 || emoji.is_empty() {
                return Err(VocabError::MalformedLine(n + 1));
            }
            *table.counts.entry(emoji.to_string()).or_default() += count;
        }
        Ok(table)
    }
}

/// Counts emoji sequences across a corpus, in parallel on the ambient rayon pool.
pub fn count_emoji_frequencies<S: AsRef<str> + Sync>(corpus: &[S]) -> EmojiFrequencyTable {
    corpus
        .par_iter()
        .fold(EmojiFrequencyTable::new, |mut table, text| {
            table.add_text(text.as_ref());
            table
        })
        .reduce(EmojiFrequencyTable::new, EmojiFrequencyTable::merge)
}

/// The `ceil(fraction × distinct)` most frequent emojis.
pub fn select_top_emojis(table: &EmojiFrequencyTable, fraction: f64) -> Result<Vec<String>, VocabError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(VocabError::InvalidFraction(fraction));
    }
    if table.is_empty() {
        return Err(VocabError::EmptyTable);
    }
    let keep = (fraction * table.total_distinct() as f64).ceil() as usize;
    Ok(table
        .ranked()
        .into_iter()
        .take(keep.min(table.total_distinct()))
        .map(|(e, _)| e.to_string())
        .collect())
}
