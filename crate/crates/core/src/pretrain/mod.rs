//! Masked-LM / next-sentence pretraining instances.
//!
//! Generation follows the BERT pretraining-data recipe: documents are
//! packed into sentence chunks, split into an A/B pair (B replaced by text
//! from another document half of the time), truncated, and masked. Every
//! (document, dupe) pair draws from its own RNG seeded from the run seed,
//! so output is identical for any worker count.

mod builder;
mod masking;
mod records;
mod rng;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builder::{build_instances, tokenize_documents, BuildOutput, BuildStats, TokenizedDocument};
pub use masking::{mask_sequence, MaskAction, MaskedSequence, Masker};
pub use records::{
    read_records, write_debug_json, write_records, RecordHeader, RecordReader, RecordWriter, RECORD_MAGIC,
    RECORD_VERSION,
};
pub use rng::{derive_seed, instance_rng, splitmix64};

#[derive(Debug, Error)]
pub enum PretrainError {
    #[error("sequence has no maskable tokens")]
    NoCandidates,
    #[error("need at least two usable documents, got {0}")]
    TooFewDocuments(usize),
    #[error("invalid pretraining config: {0}")]
    InvalidConfig(String),
    #[error("vocabulary has no non-special tokens for random replacement")]
    EmptyReplacementPool,
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("corrupt record: {0}")]
    CorruptRecord(String),
    #[error("record file version {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub max_seq_length: usize,
    pub masked_lm_prob: f64,
    pub mask_token_frac: f64,
    pub keep_frac: f64,
    pub random_frac: f64,
    pub max_predictions_per_seq: usize,
    pub dupe_factor: usize,
    pub short_seq_prob: f64,
    pub nsp_random_prob: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            max_seq_length: 128,
            masked_lm_prob: 0.15,
            mask_token_frac: 0.8,
            keep_frac: 0.1,
            random_frac: 0.1,
            max_predictions_per_seq: 20,
            dupe_factor: 10,
            short_seq_prob: 0.1,
            nsp_random_prob: 0.5,
            seed: 12345,
        }
    }
}

fn unit_interval(name: &str, v: f64) -> Result<(), PretrainError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(PretrainError::InvalidConfig(format!("{name} = {v} outside [0, 1]")))
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<(), PretrainError> {
        let fracs = self.mask_token_frac + self.keep_frac + self.random_frac;
        if (fracs - 1.0).abs() > 1e-12 {
            return Err(PretrainError::InvalidConfig(format!(
                "mask/keep/random fractions sum to {fracs}, expected 1"
            )));
        }
        for (name, v) in [
            ("mask_token_frac", self.mask_token_frac),
            ("keep_frac", self.keep_frac),
            ("random_frac", self.random_frac),
            ("short_seq_prob", self.short_seq_prob),
            ("nsp_random_prob", self.nsp_random_prob),
        ] {
            unit_interval(name, v)?;
        }
        if !(self.masked_lm_prob > 0.0 && self.masked_lm_prob < 1.0) {
            return Err(PretrainError::InvalidConfig(format!(
                "masked_lm_prob = {} outside (0, 1)",
                self.masked_lm_prob
            )));
        }
        if self.dupe_factor == 0 {
            return Err(PretrainError::InvalidConfig("dupe_factor must be at least 1".into()));
        }
        if self.max_seq_length < 5 || self.max_seq_length > u32::MAX as usize {
            return Err(PretrainError::InvalidConfig(format!(
                "max_seq_length = {} must be at least 5",
                self.max_seq_length
            )));
        }
        if self.max_predictions_per_seq == 0 {
            return Err(PretrainError::InvalidConfig("max_predictions_per_seq must be at least 1".into()));
        }
        Ok(())
    }
}

/// One MLM/NSP training example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainInstance {
    /// `[CLS] A [SEP] B [SEP]`, after masking.
    pub token_ids: Vec<u32>,
    pub segment_ids: Vec<u8>,
    pub is_random_next: bool,
    pub masked_positions: Vec<u32>,
    /// Original ids at `masked_positions`.
    pub masked_label_ids: Vec<u32>,
}

impl PretrainInstance {
    /// The sequence before masking.
    pub fn unmasked_ids(&self) -> Vec<u32> {
        let mut ids = self.token_ids.clone();
        for (&p, &label) in self.masked_positions.iter().zip(&self.masked_label_ids) {
            ids[p as usize] = label;
        }
        ids
    }

    /// Structural checks against the record limits.
    pub fn validate(&self, max_seq_length: usize, max_predictions: usize) -> Result<(), String> {
        let n = self.token_ids.len();
        if n != self.segment_ids.len() {
            return Err(format!("{} tokens but {} segment ids", n, self.segment_ids.len()));
        }
        if n > max_seq_length {
            return Err(format!("{n} tokens exceed max_seq_length {max_seq_length}"));
        }
        if self.segment_ids.iter().any(|&s| s > 1) {
            return Err("segment id outside {0, 1}".into());
        }
        if self.masked_positions.len() != self.masked_label_ids.len() {
            return Err("masked positions and labels differ in length".into());
        }
        if self.masked_positions.len() > max_predictions {
            return Err(format!(
                "{} masked positions exceed max_predictions_per_seq {max_predictions}",
                self.masked_positions.len()
            ));
        }
        if self.masked_positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err("masked positions not strictly increasing".into());
        }
        if self.masked_positions.last().is_some_and(|&p| p as usize >= n) {
            return Err("masked position out of range".into());
        }
        Ok(())
    }
}
