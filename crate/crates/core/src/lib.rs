//! Romanian tweet corpus preparation for BERT-style pretraining.
//!
//! Stages, in pipeline order: [`ingest`] (parse and deduplicate raw
//! tweets), [`langid`] (two-model agreement language filter),
//! [`normalize`] (placeholders and emoji translation), [`filter`]
//! (length and entity limits), [`segment`] (sentence documents),
//! [`vocab`] (WordPiece with tweet tokens), [`pretrain`] (MLM/NSP
//! records). [`tasks`] holds the downstream datasets and metrics, and
//! [`pipeline`] wires everything to files.

pub mod config;
pub mod filter;
pub mod ingest;
pub mod langid;
pub mod normalize;
pub mod pipeline;
pub mod pretrain;
pub mod scalar;
pub mod segment;
pub mod tasks;
pub mod vocab;

pub use scalar::Scalar;

pub type LangModel64 = langid::LangModel<f64>;
pub type LangModel32 = langid::LangModel<f32>;
pub type LangScore64 = langid::LangScore<f64>;
pub type MetricReport64 = tasks::MetricReport<f64>;
pub type MetricReport32 = tasks::MetricReport<f32>;
