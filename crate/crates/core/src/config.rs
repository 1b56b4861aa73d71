//! Flat `section.key=value` pipeline configuration.
//!
//! Values are layered: built-in defaults, then a config file, then
//! command-line overrides, each applied with [`PipelineConfig::set`].
//! Empty path values mean "unset".

use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::BufRead;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::filter::FilterConfig;
use crate::pretrain::PretrainConfig;
use crate::tasks::{Averaging, TaskKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value")]
    MalformedLine { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangIdSettings {
    pub model_a: Option<PathBuf>,
    pub model_b: Option<PathBuf>,
    pub train_corpus: Option<PathBuf>,
    pub ngram_a: (usize, usize),
    pub ngram_b: (usize, usize),
    pub alpha: f64,
    pub threshold: f64,
    pub target: String,
    /// Reject tweets whose declared language is present and differs from `target`.
    pub check_declared: bool,
    pub enabled: bool,
}

impl Default for LangIdSettings {
    fn default() -> Self {
        Self {
            model_a: None,
            model_b: None,
            train_corpus: None,
            ngram_a: (1, 2),
            ngram_b: (2, 3),
            alpha: 1.0,
            threshold: 0.5,
            target: "ro".into(),
            check_declared: false,
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSettings {
    pub task: Option<TaskKind>,
    pub averaging: Option<Averaging>,
    pub threshold: f64,
    pub mse_scale: f64,
    pub bio_repair: bool,
    pub gold: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
}

impl Default for TaskSettings {
    fn default() -> Self {
        Self {
            task: None,
            averaging: None,
            threshold: 0.5,
            mse_scale: 1.0,
            bio_repair: false,
            gold: None,
            predictions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub pretrain: PretrainConfig,
    pub langid: LangIdSettings,
    pub emoji_map: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    pub base_vocab: Option<PathBuf>,
    pub emoji_fraction: f64,
    pub debug_json: bool,
    pub tasks: TaskSettings,
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
    /// 0 uses every available core.
    pub workers: usize,
    pub shards: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let pretrain = PretrainConfig::default();
        Self {
            filter: FilterConfig::default(),
            seed: pretrain.seed,
            pretrain,
            langid: LangIdSettings::default(),
            emoji_map: None,
            abbreviations: None,
            base_vocab: None,
            emoji_fraction: 0.25,
            debug_json: false,
            tasks: TaskSettings::default(),
            input: None,
            output: PathBuf::from("out"),
            workers: 0,
            shards: 1,
        }
    }
}

pub const KEYS: &[&str] = &[
    "filter.min_words",
    "filter.max_words",
    "filter.max_mentions",
    "filter.max_hashtags",
    "filter.max_urls",
    "filter.max_emojis",
    "pretrain.max_seq_length",
    "pretrain.masked_lm_prob",
    "pretrain.mask_token_frac",
    "pretrain.keep_frac",
    "pretrain.random_frac",
    "pretrain.max_predictions_per_seq",
    "pretrain.dupe_factor",
    "pretrain.short_seq_prob",
    "pretrain.nsp_random_prob",
    "pretrain.debug_json",
    "langid.enabled",
    "langid.model_a",
    "langid.model_b",
    "langid.train_corpus",
    "langid.ngram_a",
    "langid.ngram_b",
    "langid.alpha",
    "langid.threshold",
    "langid.target",
    "langid.check_declared",
    "normalize.emoji_map",
    "segment.abbreviations",
    "vocab.base",
    "vocab.emoji_fraction",
    "tasks.task",
    "tasks.averaging",
    "tasks.threshold",
    "tasks.mse_scale",
    "tasks.bio_repair",
    "tasks.gold",
    "tasks.predictions",
    "io.input",
    "io.output",
    "run.seed",
    "run.workers",
    "run.shards",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn parse_range(key: &str, value: &str) -> Result<(usize, usize), ConfigError> {
    let bad = || ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: "expected min-max".into(),
    };
    let (a, b) = value.split_once('-').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn show_opt<T: Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "filter.min_words" => self.filter.min_words = parse(key, v)?,
            "filter.max_words" => self.filter.max_words = parse(key, v)?,
            "filter.max_mentions" => self.filter.max_mentions = parse(key, v)?,
            "filter.max_hashtags" => self.filter.max_hashtags = parse(key, v)?,
            "filter.max_urls" => self.filter.max_urls = parse(key, v)?,
            "filter.max_emojis" => self.filter.max_emojis = parse(key, v)?,
            "pretrain.max_seq_length" => self.pretrain.max_seq_length = parse(key, v)?,
            "pretrain.masked_lm_prob" => self.pretrain.masked_lm_prob = parse(key, v)?,
            "pretrain.mask_token_frac" => self.pretrain.mask_token_frac = parse(key, v)?,
            "pretrain.keep_frac" => self.pretrain.keep_frac = parse(key, v)?,
            "pretrain.random_frac" => self.pretrain.random_frac = parse(key, v)?,
            "pretrain.max_predictions_per_seq" => self.pretrain.max_predictions_per_seq = parse(key, v)?,
            "pretrain.dupe_factor" => self.pretrain.dupe_factor = parse(key, v)?,
            "pretrain.short_seq_prob" => self.pretrain.short_seq_prob = parse(key, v)?,
            "pretrain.nsp_random_prob" => self.pretrain.nsp_random_prob = parse(key, v)?,
            "pretrain.debug_json" => self.debug_json = parse(key, v)?,
            "langid.enabled" => self.langid.enabled = parse(key, v)?,
            "langid.model_a" => self.langid.model_a = parse_path(v),
            "langid.model_b" => self.langid.model_b = parse_path(v),
            "langid.train_corpus" => self.langid.train_corpus = parse_path(v),
            "langid.ngram_a" => self.langid.ngram_a = parse_range(key, v)?,
            "langid.ngram_b" => self.langid.ngram_b = parse_range(key, v)?,
            "langid.alpha" => self.langid.alpha = parse(key, v)?,
            "langid.threshold" => self.langid.threshold = parse(key, v)?,
            "langid.target" => self.langid.target = v.to_string(),
            "langid.check_declared" => self.langid.check_declared = parse(key, v)?,
            "normalize.emoji_map" => self.emoji_map = parse_path(v),
            "segment.abbreviations" => self.abbreviations = parse_path(v),
            "vocab.base" => self.base_vocab = parse_path(v),
            "vocab.emoji_fraction" => self.emoji_fraction = parse(key, v)?,
            "tasks.task" => self.tasks.task = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "tasks.averaging" => self.tasks.averaging = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "tasks.threshold" => self.tasks.threshold = parse(key, v)?,
            "tasks.mse_scale" => self.tasks.mse_scale = parse(key, v)?,
            "tasks.bio_repair" => self.tasks.bio_repair = parse(key, v)?,
            "tasks.gold" => self.tasks.gold = parse_path(v),
            "tasks.predictions" => self.tasks.predictions = parse_path(v),
            "io.input" => self.input = parse_path(v),
            "io.output" => {
                self.output = parse_path(v).ok_or_else(|| ConfigError::InvalidValue {
                    key: key.into(),
                    value: value.into(),
                    reason: "output directory cannot be empty".into(),
                })?
            }
            "run.seed" => {
                self.seed = parse(key, v)?;
                self.pretrain.seed = self.seed;
            }
            "run.workers" => self.workers = parse(key, v)?,
            "run.shards" => self.shards = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let f = &self.filter;
        let p = &self.pretrain;
        let l = &self.langid;
        let t = &self.tasks;
        Some(match key {
            "filter.min_words" => f.min_words.to_string(),
            "filter.max_words" => f.max_words.to_string(),
            "filter.max_mentions" => f.max_mentions.to_string(),
            "filter.max_hashtags" => f.max_hashtags.to_string(),
            "filter.max_urls" => f.max_urls.to_string(),
            "filter.max_emojis" => f.max_emojis.to_string(),
            "pretrain.max_seq_length" => p.max_seq_length.to_string(),
            "pretrain.masked_lm_prob" => p.masked_lm_prob.to_string(),
            "pretrain.mask_token_frac" => p.mask_token_frac.to_string(),
            "pretrain.keep_frac" => p.keep_frac.to_string(),
            "pretrain.random_frac" => p.random_frac.to_string(),
            "pretrain.max_predictions_per_seq" => p.max_predictions_per_seq.to_string(),
            "pretrain.dupe_factor" => p.dupe_factor.to_string(),
            "pretrain.short_seq_prob" => p.short_seq_prob.to_string(),
            "pretrain.nsp_random_prob" => p.nsp_random_prob.to_string(),
            "pretrain.debug_json" => self.debug_json.to_string(),
            "langid.enabled" => l.enabled.to_string(),
            "langid.model_a" => show_path(&l.model_a),
            "langid.model_b" => show_path(&l.model_b),
            "langid.train_corpus" => show_path(&l.train_corpus),
            "langid.ngram_a" => format!("{}-{}", l.ngram_a.0, l.ngram_a.1),
            "langid.ngram_b" => format!("{}-{}", l.ngram_b.0, l.ngram_b.1),
            "langid.alpha" => l.alpha.to_string(),
            "langid.threshold" => l.threshold.to_string(),
            "langid.target" => l.target.clone(),
            "langid.check_declared" => l.check_declared.to_string(),
            "normalize.emoji_map" => show_path(&self.emoji_map),
            "segment.abbreviations" => show_path(&self.abbreviations),
            "vocab.base" => show_path(&self.base_vocab),
            "vocab.emoji_fraction" => self.emoji_fraction.to_string(),
            "tasks.task" => show_opt(t.task),
            "tasks.averaging" => show_opt(t.averaging),
            "tasks.threshold" => t.threshold.to_string(),
            "tasks.mse_scale" => t.mse_scale.to_string(),
            "tasks.bio_repair" => t.bio_repair.to_string(),
            "tasks.gold" => show_path(&t.gold),
            "tasks.predictions" => show_path(&t.predictions),
            "io.input" => show_path(&self.input),
            "io.output" => self.output.display().to_string(),
            "run.seed" => self.seed.to_string(),
            "run.workers" => self.workers.to_string(),
            "run.shards" => self.shards.to_string(),
            _ => return None,
        })
    }

    /// Every key with its current value, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().map(|&k| (k, self.get(k).expect("every listed key is readable"))).collect()
    }

    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// The `key=value` file form of this config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Applies a `key=value` file on top of the current values.
    pub fn apply_reader<R: BufRead>(&mut self, reader: R) -> Result<(), ConfigError> {
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::MalformedLine { line: i + 1 })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_pairs<'a, I: IntoIterator<Item = (&'a str, &'a str)>>(&mut self, pairs: I) -> Result<(), ConfigError> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// The pretraining settings with the run seed applied.
    pub fn pretrain_config(&self) -> PretrainConfig {
        PretrainConfig {
            seed: self.seed,
            ..self.pretrain
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        self.filter.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.pretrain_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.langid.threshold > 0.0 && self.langid.threshold < 1.0) {
            return invalid(format!("langid.threshold {} outside (0, 1)", self.langid.threshold));
        }
        if self.langid.alpha.is_nan() || self.langid.alpha <= 0.0 {
            return invalid(format!("langid.alpha {} must be positive", self.langid.alpha));
        }
        for (name, (lo, hi)) in [("langid.ngram_a", self.langid.ngram_a), ("langid.ngram_b", self.langid.ngram_b)] {
            if !(1 <= lo && lo <= hi && hi <= 5) {
                return invalid(format!("{name} {lo}-{hi} must satisfy 1 <= min <= max <= 5"));
            }
        }
        if self.langid.model_a.is_some() != self.langid.model_b.is_some() {
            return invalid("langid.model_a and langid.model_b must be set together".into());
        }
        if !(self.emoji_fraction > 0.0 && self.emoji_fraction <= 1.0) {
            return invalid(format!("vocab.emoji_fraction {} outside (0, 1]", self.emoji_fraction));
        }
        if !(self.tasks.threshold > 0.0 && self.tasks.threshold < 1.0) {
            return invalid(format!("tasks.threshold {} outside (0, 1)", self.tasks.threshold));
        }
        if !(self.tasks.mse_scale > 0.0 && self.tasks.mse_scale.is_finite()) {
            return invalid(format!("tasks.mse_scale {} must be positive", self.tasks.mse_scale));
        }
        if self.shards == 0 {
            return invalid("run.shards must be at least 1".into());
        }
        Ok(())
    }
}
