//! Greedy longest-match-first WordPiece (cased).

use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use super::{Vocabulary, CONTINUATION_PREFIX};
use crate::normalize::emoji_spans;

/// Words longer than this many characters become a single unknown token.
pub const MAX_WORD_CHARS: usize = 100;

fn push_word_ids(word: &str, vocab: &Vocabulary, scratch: &mut String, out: &mut Vec<u32>) {
    if word.chars().nth(MAX_WORD_CHARS).is_some() {
        out.push(vocab.unk_id());
        return;
    }
    if let Some(id) = vocab.id(word) {
        out.push(id);
        return;
    }
    let mark = out.len();
    let mut start = 0;
    while start < word.len() {
        let mut end = word.len();
        let mut found = None;
        while end > start {
            let piece = if start == 0 {
                &word[..end]
            } else {
                scratch.clear();
                scratch.push_str(CONTINUATION_PREFIX);
                scratch.push_str(&word[start..end]);
                scratch.as_str()
            };
            if let Some(id) = vocab.id(piece) {
                found = Some(id);
                break;
            }
            end = word[..end].char_indices().next_back().map_or(start, |(i, _)| i);
        }
        match found {
            Some(id) => {
                out.push(id);
                start = end;
            }
            None => {
                out.truncate(mark);
                out.push(vocab.unk_id());
                return;
            }
        }
    }
}

/// Tokenizes each whitespace-separated word independently.
///
/// A word is the longest vocabulary prefix followed by the longest `##`
/// continuations; a word with an unmatchable remainder becomes `[UNK]`.
pub fn wordpiece_tokenize(text: &str, vocab: &Vocabulary) -> Vec<String> {
    let mut ids = Vec::new();
    let mut scratch = String::new();
    for word in text.split_whitespace() {
        push_word_ids(word, vocab, &mut scratch, &mut ids);
    }
    ids.into_iter()
        .map(|id| vocab.token(id).expect("ids come from the vocabulary").to_string())
        .collect()
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// Splits text into words on whitespace, isolating punctuation characters and
/// emoji sequences. Control characters act as whitespace. No case folding.
pub fn pre_tokenize(text: &str) -> Vec<&str> {
    let spans = emoji_spans(text);
    let mut spans = spans.into_iter().peekable();
    let mut words = Vec::new();
    let mut word_start: Option<usize> = None;
    let mut iter = text.char_indices();
    while let Some((i, c)) = iter.next() {
        if spans.peek().is_some_and(|s| s.start == i) {
            let span = spans.next().expect("peeked");
            if let Some(s) = word_start.take() {
                words.push(&text[s..i]);
            }
            words.push(&text[span.clone()]);
            while iter.as_str().len() > text.len() - span.end {
                iter.next();
            }
            continue;
        }
        if c.is_whitespace() || c.is_control() || c == '\u{FFFD}' {
            if let Some(s) = word_start.take() {
                words.push(&text[s..i]);
            }
        } else if is_punctuation(c) {
            if let Some(s) = word_start.take() {
                words.push(&text[s..i]);
            }
            words.push(&text[i..i + c.len_utf8()]);
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        words.push(&text[s..]);
    }
    words
}

/// Full text tokenizer: [`pre_tokenize`] followed by WordPiece.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    vocab: Vocabulary,
}

impl Tokenizer {
    pub fn new(vocab: Vocabulary) -> Self {
        Self { vocab }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn tokenize_ids(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        let mut scratch = String::new();
        for word in pre_tokenize(text) {
            push_word_ids(word, &self.vocab, &mut scratch, &mut ids);
        }
        ids
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.tokenize_ids(text)
            .into_iter()
            .map(|id| self.vocab.token(id).expect("ids come from the vocabulary").to_string())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::toy_vocab;
    use proptest::prelude::*;

    /// Longest-prefix oracle: scans the whole token list at every step.
    fn oracle(word: &str, vocab: &Vocabulary) -> Vec<String> {
        if word.chars().count() > MAX_WORD_CHARS {
            return vec!["[UNK]".into()];
        }
        let mut rest = word;
        let mut first = true;
        let mut pieces = Vec::new();
        while !rest.is_empty() {
            let best = vocab
                .tokens()
                .iter()
                .filter_map(|t| {
                    let body = if first {
                        (!t.starts_with("##")).then_some(t.as_str())
                    } else {
                        t.strip_prefix("##")
                    }?;
                    (!body.is_empty() && rest.starts_with(body)).then_some((body.len(), t))
                })
                .max_by_key(|(len, _)| *len);
            match best {
                Some((len, t)) => {
                    pieces.push(t.clone());
                    rest = &rest[len..];
                    first = false;
                }
                None => return vec!["[UNK]".into()],
            }
        }
        pieces
    }

    #[test]
    fn whole_word_and_continuation() {
        let v = toy_vocab(&["salut", "##are", "sal"]);
        assert_eq!(wordpiece_tokenize("salut", &v), vec!["salut"]);
        assert_eq!(wordpiece_tokenize("salutare", &v), vec!["salut", "##are"]);
        assert_eq!(wordpiece_tokenize("salutx", &v), vec!["[UNK]"]);
    }

    #[test]
    fn cased_matching() {
        let v = toy_vocab(&["Salut"]);
        assert_eq!(wordpiece_tokenize("salut Salut", &v), vec!["[UNK]", "Salut"]);
    }

    #[test]
    fn overlong_word_is_unknown() {
        let v = toy_vocab(&["a", "##a"]);
        let long = "a".repeat(101);
        assert_eq!(wordpiece_tokenize(&long, &v), vec!["[UNK]"]);
        assert_eq!(wordpiece_tokenize(&"a".repeat(100), &v).len(), 100);
    }

    #[test]
    fn pre_tokenize_isolates_punctuation_and_emoji() {
        assert_eq!(
            pre_tokenize("Salut,lume!😀ok 👍🏽„da”"),
            vec!["Salut", ",", "lume", "!", "😀", "ok", "👍🏽", "„", "da", "”"]
        );
        assert_eq!(pre_tokenize("USER :fata zambitoare:"), vec!["USER", ":", "fata", "zambitoare", ":"]);
    }

    #[test]
    fn tokenizer_keeps_specials_whole() {
        let v = toy_vocab(&["USER", "HTTPURL", "HASHTAG", "😀", "vezi"]);
        let t = Tokenizer::new(v);
        assert_eq!(t.tokenize("USER vezi HTTPURL😀HASHTAG"), vec!["USER", "vezi", "HTTPURL", "😀", "HASHTAG"]);
    }

    const TOY: [&str; 45] = [
        "a", "b", "c", "ab", "abc", "ba", "bca", "cab", "aa", "bb", "cc", "abcab", "ca", "bc", "acb",
        "cba", "abab", "bbb", "##a", "##b", "##c", "##ab", "##bc", "##ca", "##abc", "##bb", "##cab",
        "##aaa", "##cc", "##bab", "##acb", "##ba", "##cba", "x", "##x", "xa", "##xa", "xb", "bx", "##bx",
        "##ax", "cx", "xc", "##xc", "xx",
    ];

    proptest! {
        #[test]
        fn greedy_matches_oracle(word in "[abcxy]{1,12}") {
            let v = toy_vocab(&TOY);
            let got = wordpiece_tokenize(&word, &v);
            prop_assert_eq!(&got, &oracle(&word, &v));
            if got != vec!["[UNK]".to_string()] {
                let joined: String = got.iter().map(|p| p.trim_start_matches("##")).collect();
                prop_assert_eq!(joined, word);
            }
        }
    }
}
