//! Character n-gram Naive Bayes language identification and the
//! two-model agreement filter.
//!
//! Each language's n-gram likelihoods use add-alpha smoothing over the
//! training vocabulary plus one bucket for unseen n-grams, so every
//! per-language distribution sums to one.

mod model_file;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead};

use thiserror::Error;

use crate::normalize::{emoji_spans, normalize_entities, TWEET_SPECIALS};
use crate::scalar::{log_sum_exp, Scalar};

pub use model_file::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};

/// Bundled `code<TAB>text` training corpus behind [`LangModel::seed_pair`].
pub const SEED_CORPUS: &str = include_str!("../../data/langid_seed.tsv");

#[derive(Debug, Error)]
pub enum LangIdError {
    #[error("need at least two distinct languages, got {0}")]
    InsufficientLanguages(usize),
    #[error("training sample {0} is empty after preprocessing")]
    EmptySample(usize),
    #[error("text is empty after stripping placeholders and digits")]
    EmptyAfterStripping,
    #[error("invalid n-gram range ({0}, {1}); need 1 <= min <= max <= 5")]
    InvalidNgramRange(usize, usize),
    #[error("smoothing alpha must be positive")]
    InvalidAlpha,
    #[error("threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("training corpus line {0}: expected `code<TAB>text`")]
    MalformedCorpusLine(usize),
    #[error("model file: {0}")]
    CorruptModel(String),
    #[error("model file version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangScore<F: Scalar = f64> {
    pub language: String,
    pub probability: F,
}

/// Trained multinomial Naive Bayes model over character n-grams.
#[derive(Debug, Clone, PartialEq)]
pub struct LangModel<F: Scalar = f64> {
    pub(crate) languages: Vec<String>,
    pub(crate) ngram_range: (usize, usize),
    pub(crate) smoothing_alpha: F,
    pub(crate) log_priors: Vec<F>,
    pub(crate) log_unseen: Vec<F>,
    pub(crate) log_likelihoods: HashMap<String, Vec<F>>,
}

/// Lowercased text with placeholders, URLs, mentions, hashtags, digits and
/// emojis removed, whitespace collapsed.
pub fn prepare_text(text: &str) -> String {
    let mut text = normalize_entities(text);
    for span in emoji_spans(&text).into_iter().rev() {
        text.replace_range(span, " ");
    }
    let kept: Vec<String> = text
        .split_whitespace()
        .filter(|w| !TWEET_SPECIALS.contains(w))
        .map(|w| w.chars().filter(|c| !c.is_numeric()).collect::<String>().to_lowercase())
        .filter(|w| !w.is_empty())
        .collect();
    kept.join(" ")
}

/// Character n-grams of prepared text for every n in the range.
pub fn char_ngrams(prepared: &str, (min_n, max_n): (usize, usize)) -> Vec<String> {
    let chars: Vec<char> = prepared.chars().collect();
    let mut grams = Vec::new();
    for n in min_n..=max_n {
        if n > chars.len() {
            break;
        }
        grams.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
    }
    grams
}

fn check_range(range: (usize, usize)) -> Result<(), LangIdError> {
    if range.0 < 1 || range.0 > range.1 || range.1 > 5 {
        return Err(LangIdError::InvalidNgramRange(range.0, range.1));
    }
    Ok(())
}

impl<F: Scalar> LangModel<F> {
    /// Trains a model. Counting is integer-exact, so the result does not
    /// depend on sample order.
    pub fn train<S: AsRef<str>, L: AsRef<str>>(
        samples: &[(S, L)],
        ngram_range: (usize, usize),
        smoothing_alpha: F,
    ) -> Result<Self, LangIdError> {
        check_range(ngram_range)?;
        if smoothing_alpha.is_nan() || smoothing_alpha <= F::zero() {
            return Err(LangIdError::InvalidAlpha);
        }
        let mut docs_per_lang: BTreeMap<String, usize> = BTreeMap::new();
        let mut gram_counts: HashMap<String, BTreeMap<String, u64>> = HashMap::new();
        for (i, (text, lang)) in samples.iter().enumerate() {
            let prepared = prepare_text(text.as_ref());
            let grams = char_ngrams(&prepared, ngram_range);
            if grams.is_empty() {
                return Err(LangIdError::EmptySample(i));
            }
            let lang = lang.as_ref().to_string();
            *docs_per_lang.entry(lang.clone()).or_default() += 1;
            for g in grams {
                *gram_counts.entry(g).or_default().entry(lang.clone()).or_default() += 1;
            }
        }
        if docs_per_lang.len() < 2 {
            return Err(LangIdError::InsufficientLanguages(docs_per_lang.len()));
        }
        let languages: Vec<String> = docs_per_lang.keys().cloned().collect();
        let index: HashMap<&str, usize> = languages.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

        let mut totals = vec![0u64; languages.len()];
        for per_lang in gram_counts.values() {
            for (lang, c) in per_lang {
                totals[index[lang.as_str()]] += c;
            }
        }
        let vocab_size = F::of_count(gram_counts.len());
        let denominators: Vec<F> = totals
            .iter()
            .map(|&t| (F::of_count(t as usize) + smoothing_alpha * (vocab_size + F::one())).ln())
            .collect();
        let log_unseen: Vec<F> = denominators.iter().map(|&d| smoothing_alpha.ln() - d).collect();

        let log_likelihoods = gram_counts
            .into_iter()
            .map(|(gram, per_lang)| {
                let mut counts = vec![0u64; languages.len()];
                for (lang, c) in per_lang {
                    counts[index[lang.as_str()]] = c;
                }
                let logs = counts
                    .iter()
                    .zip(&denominators)
                    .map(|(&c, &d)| (F::of_count(c as usize) + smoothing_alpha).ln() - d)
                    .collect();
                (gram, logs)
            })
            .collect();

        let n_samples = F::of_count(samples.len());
        let log_priors = docs_per_lang
            .values()
            .map(|&c| (F::of_count(c) / n_samples).ln())
            .collect();

        Ok(Self {
            languages,
            ngram_range,
            smoothing_alpha,
            log_priors,
            log_unseen,
            log_likelihoods,
        })
    }

    /// Reads `code<TAB>text` lines and trains on them.
    pub fn train_from_reader<R: BufRead>(
        reader: R,
        ngram_range: (usize, usize),
        smoothing_alpha: F,
    ) -> Result<Self, LangIdError> {
        let samples = read_training_corpus(reader)?;
        Self::train(&samples, ngram_range, smoothing_alpha)
    }

    /// The two bundled detectors (n-grams 1–2 and 2–3) trained on the seed corpus.
    pub fn seed_pair() -> (Self, Self) {
        let samples = read_training_corpus(SEED_CORPUS.as_bytes()).expect("bundled corpus parses");
        let a = Self::train(&samples, (1, 2), F::one()).expect("bundled corpus trains");
        let b = Self::train(&samples, (2, 3), F::one()).expect("bundled corpus trains");
        (a, b)
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        self.ngram_range
    }

    pub fn smoothing_alpha(&self) -> F {
        self.smoothing_alpha
    }

    pub fn ngram_count(&self) -> usize {
        self.log_likelihoods.len()
    }

    /// Per-language log-likelihood of an n-gram (the unseen bucket if absent).
    pub fn log_likelihood(&self, language: usize, ngram: &str) -> F {
        self.log_likelihoods
            .get(ngram)
            .map_or(self.log_unseen[language], |v| v[language])
    }

    pub fn log_unseen(&self, language: usize) -> F {
        self.log_unseen[language]
    }

    pub fn log_prior(&self, language: usize) -> F {
        self.log_priors[language]
    }

    pub fn iter_ngrams(&self) -> impl Iterator<Item = (&str, &[F])> {
        self.log_likelihoods.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Full posterior, descending; ties by language code ascending.
    pub fn classify(&self, text: &str) -> Result<Vec<LangScore<F>>, LangIdError> {
        let prepared = prepare_text(text);
        let grams = char_ngrams(&prepared, self.ngram_range);
        if grams.is_empty() {
            return Err(LangIdError::EmptyAfterStripping);
        }
        let mut joint = self.log_priors.clone();
        for g in &grams {
            match self.log_likelihoods.get(g) {
                Some(logs) => joint.iter_mut().zip(logs).for_each(|(j, &l)| *j = *j + l),
                None => joint.iter_mut().zip(&self.log_unseen).for_each(|(j, &l)| *j = *j + l),
            }
        }
        let norm = log_sum_exp(&joint);
        let mut scores: Vec<LangScore<F>> = self
            .languages
            .iter()
            .zip(joint)
            .map(|(lang, j)| LangScore {
                language: lang.clone(),
                probability: (j - norm).exp(),
            })
            .collect();
        scores.sort_by(|a, b| {
            b.probability
                .partial_cmp(&a.probability)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.language.cmp(&b.language))
        });
        Ok(scores)
    }
}

pub fn read_training_corpus<R: BufRead>(reader: R) -> Result<Vec<(String, String)>, LangIdError> {
    let mut samples = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (code, text) = line.split_once('\t').ok_or(LangIdError::MalformedCorpusLine(n + 1))?;
        if code.trim().is_empty() {
            return Err(LangIdError::MalformedCorpusLine(n + 1));
        }
        samples.push((text.to_string(), code.trim().to_string()));
    }
    Ok(samples)
}

fn accepts<F: Scalar>(scores: &[LangScore<F>], target: &str, threshold: F) -> bool {
    scores
        .first()
        .is_some_and(|top| top.language == target && top.probability >= threshold)
}

/// True iff both models rank `target` first with probability at least `threshold`.
pub fn agreement_filter<F: Scalar>(
    text: &str,
    model_a: &LangModel<F>,
    model_b: &LangModel<F>,
    target: &str,
    threshold: F,
) -> Result<bool, LangIdError> {
    if !(threshold > F::zero() && threshold < F::one()) {
        return Err(LangIdError::InvalidThreshold(threshold.to_f64_lossy()));
    }
    let a = model_a.classify(text)?;
    if !accepts(&a, target, threshold) {
        return Ok(false);
    }
    let b = model_b.classify(text)?;
    Ok(accepts(&b, target, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trivial() -> LangModel {
        LangModel::train(&[("aaaa", "xx"), ("bbbb", "yy")], (1, 1), 1.0).unwrap()
    }

    #[test]
    fn disjoint_alphabets_rank() {
        let scores = trivial().classify("aaa").unwrap();
        assert_eq!(scores[0].language, "xx");
        assert!(scores[0].probability > 0.5 && scores[1].probability < 0.5);
    }

    #[test]
    fn precondition_errors() {
        assert!(matches!(
            LangModel::<f64>::train(&[("aaaa", "xx"), ("bb", "xx")], (1, 1), 1.0),
            Err(LangIdError::InsufficientLanguages(1))
        ));
        assert!(matches!(
            LangModel::<f64>::train(&[("aaaa", "xx"), ("123", "yy")], (1, 1), 1.0),
            Err(LangIdError::EmptySample(1))
        ));
        assert!(LangModel::<f64>::train(&[("a", "x"), ("b", "y")], (0, 2), 1.0).is_err());
        assert!(LangModel::<f64>::train(&[("a", "x"), ("b", "y")], (1, 6), 1.0).is_err());
        assert!(matches!(trivial().classify(""), Err(LangIdError::EmptyAfterStripping)));
        assert!(matches!(trivial().classify("USER 42 HTTPURL"), Err(LangIdError::EmptyAfterStripping)));
    }

    /// Hand-computed: texts "ab" (xx) and "bc" (yy), n = 1..2, alpha = 1.
    /// n-grams: xx {a, b, ab}, yy {b, c, bc}; vocabulary {a, b, c, ab, bc} (V = 5).
    /// Each language has N = 3, denominator 3 + 1 * 6 = 9.
    /// Query "abd": n-grams a, b, d, ab, bd (d and bd unseen).
    /// xx: a 2/9, b 2/9, d 1/9, ab 2/9, bd 1/9; yy: a 1/9, b 2/9, d 1/9, ab 1/9, bd 1/9.
    /// Equal priors, so P(xx) = 8 / (8 + 2) = 0.8.
    #[test]
    fn posterior_equals_hand_computation() {
        let m: LangModel = LangModel::train(&[("ab", "xx"), ("bc", "yy")], (1, 2), 1.0).unwrap();
        assert_eq!(m.ngram_count(), 5);
        let s = m.classify("abd").unwrap();
        assert_eq!(s[0].language, "xx");
        assert!((s[0].probability - 0.8).abs() < 1e-9);
        assert!((s[1].probability - 0.2).abs() < 1e-9);
        assert!((m.log_likelihood(0, "ab") - (2.0f64 / 9.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_code() {
        let m: LangModel = LangModel::train(&[("ab", "yy"), ("ab", "xx")], (1, 1), 1.0).unwrap();
        let s = m.classify("ab").unwrap();
        assert_eq!(s[0].language, "xx");
        assert!((s[0].probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn likelihoods_sum_to_one() {
        let (a, b) = LangModel::<f64>::seed_pair();
        for m in [&a, &b] {
            for l in 0..m.languages().len() {
                let total: f64 = m.iter_ngrams().map(|(_, v)| v[l].exp()).sum::<f64>() + m.log_unseen(l).exp();
                assert!((total - 1.0).abs() < 1e-9, "{total}");
            }
        }
    }

    #[test]
    fn seed_models_separate_romanian_and_english() {
        let (a, b) = LangModel::<f64>::seed_pair();
        let ro = "Astăzi am fost la piață și am cumpărat niște roșii foarte bune pentru ciorbă";
        let en = "Today I went to the market and bought some really good tomatoes for the soup";
        assert!(agreement_filter(ro, &a, &b, "ro", 0.5).unwrap());
        assert!(!agreement_filter(en, &a, &b, "ro", 0.5).unwrap());
        assert!(agreement_filter(ro, &a, &b, "ro", 1.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let m = LangModel::<f32>::train(&[("aaaa", "xx"), ("bbbb", "yy")], (1, 1), 1.0).unwrap();
        let s = m.classify("aab").unwrap();
        let total: f32 = s.iter().map(|x| x.probability).sum();
        assert!((total - 1.0).abs() < 1e-5);
        assert_eq!(s[0].language, "xx");
    }

    proptest! {
        #[test]
        fn posteriors_sum_to_one(text in "[a-zăîșțA-Z ,.]{1,40}") {
            let (a, _) = LangModel::<f64>::seed_pair();
            if let Ok(scores) = a.classify(&text) {
                let total: f64 = scores.iter().map(|s| s.probability).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn training_is_permutation_invariant(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut samples = read_training_corpus(SEED_CORPUS.as_bytes()).unwrap();
            let base: LangModel = LangModel::train(&samples, (1, 3), 0.5).unwrap();
            samples.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: LangModel = LangModel::train(&samples, (1, 3), 0.5).unwrap();
            prop_assert_eq!(base.languages(), shuffled.languages());
            for (g, v) in base.iter_ngrams() {
                let w = &shuffled.log_likelihoods[g];
                for (x, y) in v.iter().zip(w) {
                    prop_assert!((x - y).abs() <= 1e-9);
                }
            }
        }
    }
}
