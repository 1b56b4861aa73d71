//! File-level orchestration of the corpus stages.
//!
//! Every stage reads and writes plain files under the configured output
//! directory and leaves a `<stage>.manifest.json` next to them:
//!
//! | stage          | default input                    | output                                   |
//! |----------------|----------------------------------|------------------------------------------|
//! | ingest         | `io.input` (file or directory)   | `ingested.jsonl`                         |
//! | langid-train   | `langid.train_corpus` or bundled | `langid-a.rlid`, `langid-b.rlid`         |
//! | clean          | `ingested.jsonl`                 | `clean.jsonl`, `emoji-freq.tsv`          |
//! | segment        | `clean.jsonl`                    | `corpus/corpus-NNNNN.txt`                |
//! | vocab          | `emoji-freq.tsv` + `vocab.base`  | `vocab.txt`                              |
//! | pretrain-data  | `corpus/` + `vocab.txt`          | `records/pretrain-NNNNN.rbtw`            |
//! | task-prep      | `io.input`                       | `task-<task>.jsonl`                      |
//! | eval           | `tasks.gold` + `tasks.predictions` | `eval-<task>.json`                     |
//! | stats          | `ingested.jsonl`                 | `stats.json`                             |

mod stages;
mod tasks;

pub use stages::{CleanOutcome, Cleaner, ModelPair};

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::ingest::IngestError;
use crate::langid::LangIdError;
use crate::normalize::NormalizeError;
use crate::pretrain::PretrainError;
use crate::segment::SegmentError;
use crate::tasks::TaskError;
use crate::vocab::VocabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Ingest,
    LangIdTrain,
    Clean,
    Segment,
    Vocab,
    PretrainData,
    TaskPrep,
    Eval,
    Stats,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::LangIdTrain,
        Stage::Clean,
        Stage::Segment,
        Stage::Vocab,
        Stage::PretrainData,
        Stage::TaskPrep,
        Stage::Eval,
        Stage::Stats,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::LangIdTrain => "langid-train",
            Stage::Clean => "clean",
            Stage::Segment => "segment",
            Stage::Vocab => "vocab",
            Stage::PretrainData => "pretrain-data",
            Stage::TaskPrep => "task-prep",
            Stage::Eval => "eval",
            Stage::Stats => "stats",
        }
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input missing: {}", .0.display())]
    InputMissing(PathBuf),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    LangId(#[from] LangIdError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Pretrain(#[from] PretrainError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("{0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl StageError {
    fn is_io(&self) -> bool {
        matches!(
            self,
            StageError::Io(_)
                | StageError::File { .. }
                | StageError::Ingest(IngestError::Io(_))
                | StageError::LangId(LangIdError::Io(_))
                | StageError::Normalize(NormalizeError::Io(_))
                | StageError::Segment(SegmentError::Io(_) | SegmentError::SinkFailure(_))
                | StageError::Vocab(VocabError::Io(_))
                | StageError::Pretrain(PretrainError::Io(_))
                | StageError::Task(TaskError::Io(_))
        )
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage}: input missing: {}", path.display())]
    InputMissing { stage: &'static str, path: PathBuf },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: StageError,
    },
}

impl PipelineError {
    fn from_stage(stage: Stage, err: StageError) -> Self {
        match err {
            StageError::Config(e) => PipelineError::Config(e),
            StageError::InputMissing(path) => PipelineError::InputMissing {
                stage: stage.as_str(),
                path,
            },
            source => PipelineError::Stage {
                stage: stage.as_str(),
                source,
            },
        }
    }

    /// 1 for usage/config errors, 2 for data errors, 3 for I/O errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::InputMissing { .. } => 3,
            PipelineError::Stage { source, .. } if source.is_io() => 3,
            PipelineError::Stage { .. } => 2,
        }
    }
}

/// Per-stage accounting. For every stage `read = emitted + sum(rejected)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub read: u64,
    pub emitted: u64,
    pub rejected: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, u64>,
}

impl StageReport {
    pub fn new(stage: Stage) -> Self {
        Self {
            stage: stage.as_str().to_string(),
            ..Default::default()
        }
    }

    pub fn reject(&mut self, reason: &str, n: u64) {
        *self.rejected.entry(reason.to_string()).or_default() += n;
    }

    pub fn total_rejected(&self) -> u64 {
        self.rejected.values().sum()
    }

    pub fn is_conserved(&self) -> bool {
        self.read == self.emitted + self.total_rejected()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    /// Input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path, relative to the output directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub stages: Vec<StageReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(cfg: &PipelineConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config: cfg.snapshot(),
            ..Default::default()
        }
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == stage.as_str())
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let file = File::open(path).map_err(|source| PipelineError::Stage {
            stage: "manifest",
            source: StageError::File {
                path: path.to_path_buf(),
                source,
            },
        })?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| PipelineError::Stage {
            stage: "manifest",
            source: StageError::Data(format!("{}: {e}", path.display())),
        })
    }

    /// Rebuilds the config a manifest was produced with.
    pub fn to_config(&self) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_pairs(self.config.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        Ok(cfg)
    }

    fn write(&self, path: &Path) -> Result<(), StageError> {
        let file = File::create(path).map_err(|source| StageError::File {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    io::copy(&mut File::open(path)?, &mut hasher)?;
    Ok(hex::encode(hasher.finalize()))
}

/// Runs `f` on a rayon pool with `workers` threads (0 = rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool construction");
    pool.install(f)
}

fn prepare_output(cfg: &PipelineConfig) -> Result<(), StageError> {
    fs::create_dir_all(&cfg.output).map_err(|source| StageError::File {
        path: cfg.output.clone(),
        source,
    })
}

fn dispatch(stage: Stage, cfg: &PipelineConfig, input: Option<&Path>, m: &mut RunManifest) -> Result<(), StageError> {
    match stage {
        Stage::Ingest => stages::ingest(cfg, input, m),
        Stage::LangIdTrain => stages::langid_train(cfg, input, m),
        Stage::Clean => stages::clean(cfg, input, m),
        Stage::Segment => stages::segment(cfg, input, m),
        Stage::Vocab => stages::vocab(cfg, input, m),
        Stage::PretrainData => stages::pretrain_data(cfg, input, m),
        Stage::TaskPrep => tasks::task_prep(cfg, input, m),
        Stage::Eval => tasks::eval(cfg, m),
        Stage::Stats => stages::stats(cfg, input, m),
    }
}

/// Runs one stage; `io.input` overrides the stage's default input.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    with_workers(cfg.workers, || {
        let mut m = RunManifest::new(cfg);
        let result = prepare_output(cfg).and_then(|_| dispatch(stage, cfg, cfg.input.as_deref(), &mut m));
        result.map_err(|e| PipelineError::from_stage(stage, e))?;
        m.write(&cfg.output.join(format!("{}.manifest.json", stage.as_str())))
            .map_err(|e| PipelineError::from_stage(stage, e))?;
        Ok(m)
    })
}

/// Stage order of a full run.
pub const PIPELINE: [Stage; 5] = [Stage::Ingest, Stage::Clean, Stage::Segment, Stage::Vocab, Stage::PretrainData];

/// Ingest through pretraining records. `io.input` is the raw archive; a
/// failing stage aborts the run after writing the manifest so far.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    cfg.validate()?;
    if cfg.base_vocab.is_none() {
        return Err(ConfigError::Invalid("vocab.base is required for a full pipeline run".into()).into());
    }
    with_workers(cfg.workers, || {
        let mut m = RunManifest::new(cfg);
        let manifest_path = cfg.output.join("pipeline.manifest.json");
        prepare_output(cfg).map_err(|e| PipelineError::from_stage(Stage::Ingest, e))?;
        let mut stages = PIPELINE.to_vec();
        if cfg.langid.enabled && cfg.langid.model_a.is_none() && cfg.langid.train_corpus.is_some() {
            stages.insert(1, Stage::LangIdTrain);
        }
        for stage in stages {
            let input = if stage == Stage::Ingest { cfg.input.as_deref() } else { None };
            if let Err(e) = dispatch(stage, cfg, input, &mut m) {
                // Best effort: the stage error is what gets reported.
                let _ = m.write(&manifest_path);
                return Err(PipelineError::from_stage(stage, e));
            }
        }
        m.write(&manifest_path)
            .map_err(|e| PipelineError::from_stage(Stage::PretrainData, e))?;
        Ok(m)
    })
}
