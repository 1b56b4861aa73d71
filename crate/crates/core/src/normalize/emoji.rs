//! Emoji detection and emoji-to-text translation.

use std::collections::HashMap;
use std::io::BufRead;
use std::ops::Range;
use std::sync::LazyLock;

use unicode_properties::emoji::{EmojiStatus, UnicodeEmoji};
use unicode_segmentation::UnicodeSegmentation;

use super::NormalizeError;

const VS16: char = '\u{FE0F}';

fn has_emoji_presentation(c: char) -> bool {
    matches!(
        c.emoji_status(),
        EmojiStatus::EmojiPresentation
            | EmojiStatus::EmojiPresentationAndModifierBase
            | EmojiStatus::EmojiPresentationAndEmojiComponent
            | EmojiStatus::EmojiPresentationAndModifierAndEmojiComponent
    )
}

/// A grapheme cluster is an emoji when it holds an `Emoji_Presentation`
/// code point, or an emoji character forced to emoji style with VS16.
pub fn is_emoji_cluster(cluster: &str) -> bool {
    let vs16 = cluster.contains(VS16);
    cluster
        .chars()
        .any(|c| has_emoji_presentation(c) || (vs16 && c.is_emoji_char()))
}

/// Byte ranges of emoji sequences, one per emoji grapheme cluster.
///
/// A ZWJ sequence, a flag pair and a modifier sequence are each a single range.
/// Leading non-emoji code points that share the cluster (a letter followed
/// by a stray skin-tone modifier) are left outside the range.
pub fn emoji_spans(text: &str) -> Vec<Range<usize>> {
    if text.is_ascii() {
        return Vec::new();
    }
    text.grapheme_indices(true)
        .filter(|(_, g)| is_emoji_cluster(g))
        .map(|(start, g)| {
            let lead = g
                .char_indices()
                .find(|(_, c)| c.is_emoji_char_or_emoji_component())
                .map_or(0, |(i, _)| i);
            start + lead..start + g.len()
        })
        .collect()
}

/// Emoji sequences in order of appearance.
pub fn emoji_sequences(text: &str) -> impl Iterator<Item = &str> {
    emoji_spans(text).into_iter().map(move |r| &text[r])
}

pub fn count_emojis(text: &str) -> usize {
    emoji_spans(text).len()
}

fn strip_vs16(s: &str) -> String {
    s.chars().filter(|&c| c != VS16).collect()
}

fn clean_description(desc: &str) -> String {
    desc.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Emoji sequence → textual description.
///
/// Keys are matched with VS16 selectors removed on both sides, so the
/// fully-qualified and unqualified forms of an emoji share one entry.
#[derive(Debug, Clone, Default)]
pub struct EmojiMap {
    entries: HashMap<String, String>,
    max_key_chars: usize,
}

impl EmojiMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry; an existing entry for the same sequence is kept.
    pub fn insert(&mut self, emoji: &str, description: &str) -> Result<bool, NormalizeError> {
        let emoji = emoji.trim();
        if emoji_spans(emoji).is_empty() {
            return Err(NormalizeError::InvalidEmojiKey(emoji.to_string()));
        }
        let key = strip_vs16(emoji);
        let desc = clean_description(description);
        if desc.is_empty() || !emoji_spans(&desc).is_empty() || desc.contains(':') {
            return Err(NormalizeError::InvalidDescription(description.to_string()));
        }
        if self.entries.contains_key(&key) {
            return Ok(false);
        }
        self.max_key_chars = self.max_key_chars.max(key.chars().count());
        self.entries.insert(key, desc);
        Ok(true)
    }

    /// Loads `emoji<TAB>description` lines. Blank lines and `#` comments are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, NormalizeError> {
        let mut map = Self::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with("# ") {
                continue;
            }
            let (emoji, desc) = line
                .split_once('\t')
                .ok_or_else(|| NormalizeError::MalformedMapLine(n + 1))?;
            map.insert(emoji, desc)?;
        }
        Ok(map)
    }

    /// Default map built from CLDR short names, e.g. `🇷🇴 → "flag romania"`.
    pub fn builtin() -> &'static EmojiMap {
        static BUILTIN: LazyLock<EmojiMap> = LazyLock::new(|| {
            let mut map = EmojiMap::new();
            for emoji in emojis::iter() {
                let variants = emoji
                    .skin_tones()
                    .map(|it| it.collect::<Vec<_>>())
                    .unwrap_or_else(|| vec![emoji]);
                for e in variants {
                    let name: String = e
                        .name()
                        .chars()
                        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
                        .collect();
                    // Entries whose key fails detection (text-default symbols
                    // without VS16) are not reachable anyway.
                    let _ = map.insert(e.as_str(), &name);
                }
            }
            map
        });
        &BUILTIN
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, emoji: &str) -> Option<&str> {
        self.entries.get(&strip_vs16(emoji)).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Longest key that is a prefix of `chars`, as (char length, description).
    fn longest_match(&self, chars: &[char]) -> Option<(usize, &str)> {
        let mut candidate = String::new();
        let limit = self.max_key_chars.min(chars.len());
        let mut best = None;
        for (len, &c) in chars[..limit].iter().enumerate() {
            candidate.push(c);
            if let Some(desc) = self.entries.get(&candidate) {
                best = Some((len + 1, desc.as_str()));
            }
        }
        best
    }
}

/// Replaces every emoji sequence with ` :description: `.
///
/// Inside one sequence the longest mapped prefix wins; unmapped remainders
/// become a single space. Whitespace is collapsed when anything was replaced.
pub fn translate_emojis(text: &str, map: &EmojiMap) -> String {
    let spans = emoji_spans(text);
    if spans.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len() + 16 * spans.len());
    let mut last = 0;
    for span in spans {
        out.push_str(&text[last..span.start]);
        let chars: Vec<char> = text[span.clone()].chars().filter(|&c| c != VS16).collect();
        let mut pos = 0;
        let mut unmatched = false;
        while pos < chars.len() {
            match map.longest_match(&chars[pos..]) {
                Some((len, desc)) => {
                    out.push_str(" :");
                    out.push_str(desc);
                    out.push_str(": ");
                    unmatched = false;
                    pos += len;
                }
                None => {
                    if !unmatched {
                        out.push(' ');
                    }
                    unmatched = true;
                    pos += 1;
                }
            }
        }
        last = span.end;
    }
    out.push_str(&text[last..]);
    super::collapse_whitespace(&out)
}
