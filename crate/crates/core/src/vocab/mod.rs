//! WordPiece vocabulary, its tweet-specific extension, and the tokenizer.

mod emoji_freq;
mod wordpiece;

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};

use thiserror::Error;

pub use emoji_freq::{count_emoji_frequencies, select_top_emojis, EmojiFrequencyTable};
pub use wordpiece::{pre_tokenize, wordpiece_tokenize, Tokenizer, MAX_WORD_CHARS};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";
pub const STRUCTURAL_SPECIALS: [&str; 5] = [PAD, UNK, CLS, SEP, MASK];
pub const CONTINUATION_PREFIX: &str = "##";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("duplicate token {0:?} in vocabulary")]
    DuplicateToken(String),
    #[error("duplicate token {0:?} within additions")]
    DuplicateWithinAdditions(String),
    #[error("vocabulary lacks special token {0}")]
    MissingSpecial(&'static str),
    #[error("invalid token {0:?}: tokens must be non-empty and whitespace-free")]
    InvalidToken(String),
    #[error("token id {id} out of range for vocabulary of {len}")]
    IdOutOfRange { id: u32, len: usize },
    #[error("emoji frequency table is empty")]
    EmptyTable,
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("malformed frequency line {0}")]
    MalformedLine(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub pad: u32,
    pub unk: u32,
    pub cls: u32,
    pub sep: u32,
    pub mask: u32,
}

impl SpecialIds {
    pub fn contains(&self, id: u32) -> bool {
        [self.pad, self.unk, self.cls, self.sep, self.mask].contains(&id)
    }
}

/// Token ↔ id mapping; ids are positions in the token list.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    id_of: HashMap<String, u32>,
    special: SpecialIds,
}

fn valid_token(t: &str) -> bool {
    !t.is_empty() && !t.chars().any(char::is_whitespace)
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        let mut id_of = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if !valid_token(t) {
                return Err(VocabError::InvalidToken(t.clone()));
            }
            let id = u32::try_from(i).expect("vocabulary fits in u32");
            if id_of.insert(t.clone(), id).is_some() {
                return Err(VocabError::DuplicateToken(t.clone()));
            }
        }
        let find = |name: &'static str| id_of.get(name).copied().ok_or(VocabError::MissingSpecial(name));
        let special = SpecialIds {
            pad: find(PAD)?,
            unk: find(UNK)?,
            cls: find(CLS)?,
            sep: find(SEP)?,
            mask: find(MASK)?,
        };
        Ok(Self {
            tokens,
            id_of,
            special,
        })
    }

    /// Reads a `vocab.txt`: one token per line, line number = id.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, VocabError> {
        let tokens = reader
            .lines()
            .map(|l| l.map(|s| s.trim_end_matches('\r').to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_tokens(tokens)
    }

    pub fn write_to<W: Write>(&self, mut sink: W) -> io::Result<()> {
        for t in &self.tokens {
            writeln!(sink, "{t}")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.id_of.contains_key(token)
    }

    pub fn special(&self) -> SpecialIds {
        self.special
    }

    pub fn unk_id(&self) -> u32 {
        self.special.unk
    }

    pub fn has_tweet_specials(&self) -> bool {
        crate::normalize::TWEET_SPECIALS.iter().all(|t| self.contains(t))
    }
}

/// Appends specials then emojis that are not yet present; existing ids are unchanged.
pub fn extend_vocabulary<S: AsRef<str>, E: AsRef<str>>(
    base: &Vocabulary,
    specials: &[S],
    emojis: &[E],
) -> Result<Vocabulary, VocabError> {
    let additions: Vec<&str> = specials
        .iter()
        .map(AsRef::as_ref)
        .chain(emojis.iter().map(AsRef::as_ref))
        .collect();
    let mut seen = HashSet::new();
    for a in &additions {
        if !valid_token(a) {
            return Err(VocabError::InvalidToken(a.to_string()));
        }
        if !seen.insert(*a) {
            return Err(VocabError::DuplicateWithinAdditions(a.to_string()));
        }
    }
    let mut extended = base.clone();
    for a in additions {
        if !extended.contains(a) {
            let id = u32::try_from(extended.tokens.len()).expect("vocabulary fits in u32");
            extended.tokens.push(a.to_string());
            extended.id_of.insert(a.to_string(), id);
        }
    }
    Ok(extended)
}

/// Out-of-vocabulary tokens map to the unknown id.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Vec<u32> {
    tokens
        .iter()
        .map(|t| vocab.id(t.as_ref()).unwrap_or(vocab.special.unk))
        .collect()
}

pub fn decode(ids: &[u32], vocab: &Vocabulary) -> Result<Vec<String>, VocabError> {
    ids.iter()
        .map(|&id| {
            vocab
                .token(id)
                .map(str::to_string)
                .ok_or(VocabError::IdOutOfRange {
                    id,
                    len: vocab.len(),
                })
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn toy_vocab(extra: &[&str]) -> Vocabulary {
    let tokens = STRUCTURAL_SPECIALS
        .iter()
        .chain(extra)
        .map(|s| s.to_string())
        .collect();
    Vocabulary::from_tokens(tokens).unwrap()
}
