//! Downstream evaluation datasets and their metrics.

mod datasets;
mod metrics;
mod ner;

use thiserror::Error;

pub use datasets::{
    derive_sli_labels, load_task_dataset, ConllSentence, read_conll, read_coroseof, read_ner, read_red_v2, EmotionExample, SexismBinary,
    SexismExample, SexismKind, SexismLabel, TaskExample, TaskKind,
};
pub use metrics::{
    binarize, f1_multilabel, hamming_loss, mse, prf_singlelabel, subset_accuracy, Averaging, ClassScores,
    MetricReport,
};
pub use ner::{align_first_subwords, bio_decode, entity_f1, Alignment, BioMode, EntitySpan, NerExample};

/// Emotion label order used by every emotion vector.
pub const EMOTIONS: [&str; 7] = ["anger", "fear", "happiness", "sadness", "surprise", "trust", "neutral"];

pub const NER_TYPES: [&str; 9] = ["PER", "LOC", "ORG", "TM", "LEG", "DIS", "CHM", "MD", "ANT"];

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("label matrix entry {0} is not 0 or 1")]
    NonBinary(u8),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    /// `at` is the sequence position, or the 1-based line number when raised by a loader.
    #[error("invalid BIO tag {tag:?} at {at}")]
    InvalidBio { at: usize, tag: String },
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("NER alignment needs a vocabulary")]
    VocabularyRequired,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
