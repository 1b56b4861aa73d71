//! Tweet normalization: entity placeholders and emoji translation.
//!
//! Patterns (pinned, see tests):
//! - mention: `@[A-Za-z0-9_]{1,15}` → `USER`
//! - url: `(https?://|www\.)[^\s]+` → `HTTPURL`
//! - hashtag: `#[\p{L}\p{N}_]+` → `HASHTAG`
//!
//! URLs are matched first so `#` and `@` inside links are not counted twice.

mod emoji;

use std::borrow::Cow;
use std::io;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use emoji::{
    count_emojis, emoji_sequences, emoji_spans, is_emoji_cluster, translate_emojis, EmojiMap,
};

pub const USER: &str = "USER";
pub const HTTPURL: &str = "HTTPURL";
pub const HASHTAG: &str = "HASHTAG";
pub const TWEET_SPECIALS: [&str; 3] = [USER, HTTPURL, HASHTAG];

pub static MENTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"@[A-Za-z0-9_]{1,15}").unwrap());
pub static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(https?://|www\.)[^\s]+").unwrap());
pub static HASHTAG_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"#[\p{L}\p{N}_]+").unwrap());

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("not an emoji sequence: {0:?}")]
    InvalidEmojiKey(String),
    #[error("invalid emoji description: {0:?}")]
    InvalidDescription(String),
    #[error("emoji map line {0}: expected `emoji<TAB>description`")]
    MalformedMapLine(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Entity counts measured on the raw tweet text.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCounts {
    pub mentions: usize,
    pub hashtags: usize,
    pub urls: usize,
    pub emojis: usize,
}

pub(crate) fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub fn count_entities(text: &str) -> EntityCounts {
    let urls = URL_RE.find_iter(text).count();
    let rest = if urls > 0 {
        URL_RE.replace_all(text, " ")
    } else {
        Cow::Borrowed(text)
    };
    EntityCounts {
        mentions: MENTION_RE.find_iter(&rest).count(),
        hashtags: HASHTAG_RE.find_iter(&rest).count(),
        urls,
        emojis: count_emojis(&rest),
    }
}

/// Replaces URLs, mentions and hashtags with placeholder words and collapses whitespace.
///
/// Idempotent: placeholders are plain words that none of the patterns match.
pub fn normalize_entities(text: &str) -> String {
    let step = URL_RE.replace_all(text, " HTTPURL ");
    let step = MENTION_RE.replace_all(&step, " USER ");
    let step = HASHTAG_RE.replace_all(&step, " HASHTAG ");
    collapse_whitespace(&step)
}

/// Unescapes the three entities Twitter escapes in tweet text.
pub fn unescape_html(text: &str) -> Cow<'_, str> {
    if !text.contains('&') {
        return Cow::Borrowed(text);
    }
    Cow::Owned(
        text.replace("&lt;", "<")
            .replace("&gt;", ">")
            .replace("&amp;", "&"),
    )
}
