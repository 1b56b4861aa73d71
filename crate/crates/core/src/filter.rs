//! Length and spam filters.
//!
//! Boundaries are literal: fewer than `min_words` or more than `max_words`
//! words is rejected, and an entity count above its maximum is rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::EntityCounts;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FilterConfigError {
    #[error("min_words must be at least 1")]
    ZeroMinWords,
    #[error("max_words ({max}) is below min_words ({min})")]
    InvertedBounds { min: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_words: usize,
    pub max_words: usize,
    pub max_mentions: usize,
    pub max_hashtags: usize,
    pub max_urls: usize,
    pub max_emojis: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_words: 5,
            max_words: 256,
            max_mentions: 3,
            max_hashtags: 3,
            max_urls: 3,
            max_emojis: 3,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterConfigError> {
        if self.min_words == 0 {
            return Err(FilterConfigError::ZeroMinWords);
        }
        if self.max_words < self.min_words {
            return Err(FilterConfigError::InvertedBounds {
                min: self.min_words,
                max: self.max_words,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectReason {
    TooShort,
    TooLong,
    TooManyMentions,
    TooManyHashtags,
    TooManyUrls,
    TooManyEmojis,
    NotTargetLanguage,
}

impl RejectReason {
    pub const ALL: [RejectReason; 7] = [
        RejectReason::TooShort,
        RejectReason::TooLong,
        RejectReason::TooManyMentions,
        RejectReason::TooManyHashtags,
        RejectReason::TooManyUrls,
        RejectReason::TooManyEmojis,
        RejectReason::NotTargetLanguage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::TooShort => "TooShort",
            RejectReason::TooLong => "TooLong",
            RejectReason::TooManyMentions => "TooManyMentions",
            RejectReason::TooManyHashtags => "TooManyHashtags",
            RejectReason::TooManyUrls => "TooManyUrls",
            RejectReason::TooManyEmojis => "TooManyEmojis",
            RejectReason::NotTargetLanguage => "NotTargetLanguage",
        }
    }
}

/// `reason` is `None` exactly when the tweet is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub reason: Option<RejectReason>,
}

impl FilterVerdict {
    pub const ACCEPT: FilterVerdict = FilterVerdict { reason: None };

    pub fn reject(reason: RejectReason) -> Self {
        Self {
            reason: Some(reason),
        }
    }

    pub fn accepted(&self) -> bool {
        self.reason.is_none()
    }
}

/// Number of maximal non-whitespace runs.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// First failing check wins, in [`RejectReason`] declaration order.
pub fn apply_filters(text: &str, counts: &EntityCounts, cfg: &FilterConfig) -> FilterVerdict {
    let words = word_count(text);
    let checks = [
        (words < cfg.min_words, RejectReason::TooShort),
        (words > cfg.max_words, RejectReason::TooLong),
        (counts.mentions > cfg.max_mentions, RejectReason::TooManyMentions),
        (counts.hashtags > cfg.max_hashtags, RejectReason::TooManyHashtags),
        (counts.urls > cfg.max_urls, RejectReason::TooManyUrls),
        (counts.emojis > cfg.max_emojis, RejectReason::TooManyEmojis),
    ];
    checks
        .into_iter()
        .find(|(failed, _)| *failed)
        .map_or(FilterVerdict::ACCEPT, |(_, reason)| FilterVerdict::reject(reason))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn words(n: usize) -> String {
        vec!["w"; n].join(" ")
    }

    fn scan_words(text: &str) -> usize {
        let mut count = 0;
        let mut inside = false;
        for c in text.chars() {
            if c.is_whitespace() {
                inside = false;
            } else if !inside {
                inside = true;
                count += 1;
            }
        }
        count
    }

    #[test]
    fn word_count_examples() {
        assert_eq!(word_count("a b  c"), 3);
        assert_eq!(word_count(""), 0);
    }

    #[test]
    fn four_words_too_short() {
        let v = apply_filters(&words(4), &EntityCounts::default(), &FilterConfig::default());
        assert_eq!(v.reason, Some(RejectReason::TooShort));
        assert!(!v.accepted());
    }

    #[test]
    fn four_mentions_rejected() {
        let counts = EntityCounts {
            mentions: 4,
            ..Default::default()
        };
        let v = apply_filters(&words(10), &counts, &FilterConfig::default());
        assert_eq!(v.reason, Some(RejectReason::TooManyMentions));
    }

    #[test]
    fn first_failing_check_wins() {
        let counts = EntityCounts {
            mentions: 9,
            emojis: 9,
            ..Default::default()
        };
        let v = apply_filters(&words(300), &counts, &FilterConfig::default());
        assert_eq!(v.reason, Some(RejectReason::TooLong));
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig::default().validate().is_ok());
        let bad = FilterConfig {
            min_words: 10,
            max_words: 5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn word_count_matches_scan(s in "[a-z \t\n\u{a0}]{0,40}") {
            prop_assert_eq!(word_count(&s), scan_words(&s));
        }

        #[test]
        fn loosening_never_shrinks(n in 0usize..300, m in 0usize..6, h in 0usize..6, which in 0usize..6) {
            let counts = EntityCounts { mentions: m, hashtags: h, urls: m, emojis: h };
            let cfg = FilterConfig::default();
            let mut loose = cfg;
            match which {
                0 => loose.min_words -= 1,
                1 => loose.max_words += 1,
                2 => loose.max_mentions += 1,
                3 => loose.max_hashtags += 1,
                4 => loose.max_urls += 1,
                _ => loose.max_emojis += 1,
            }
            let text = words(n);
            if apply_filters(&text, &counts, &cfg).accepted() {
                prop_assert!(apply_filters(&text, &counts, &loose).accepted());
            }
        }
    }
}
