use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{sha256_file, RunManifest, Stage, StageError, StageReport};
use crate::config::{ConfigError, PipelineConfig};
use crate::filter::{apply_filters, word_count, FilterConfig, RejectReason};
use crate::ingest::{ingest_stream, read_records, serialize_record, DedupState, IngestError, RawTweet};
use crate::langid::{agreement_filter, read_model, read_training_corpus, write_model, LangModel, SEED_CORPUS};
use crate::normalize::{count_entities, normalize_entities, translate_emojis, unescape_html, EmojiMap, TWEET_SPECIALS};
use crate::pretrain::{build_instances, tokenize_documents, write_debug_json, PretrainError, RecordHeader, RecordWriter};
use crate::segment::{read_documents, shard_file_name, split_sentences, Document, DocumentWriter, SegmentError, SentenceSplitter};
use crate::vocab::{extend_vocabulary, select_top_emojis, EmojiFrequencyTable, Tokenizer, Vocabulary};

pub(crate) const INGESTED: &str = "ingested.jsonl";
pub(crate) const LANGID_A: &str = "langid-a.rlid";
pub(crate) const LANGID_B: &str = "langid-b.rlid";
pub(crate) const CLEAN: &str = "clean.jsonl";
pub(crate) const EMOJI_FREQ: &str = "emoji-freq.tsv";
pub(crate) const CORPUS_DIR: &str = "corpus";
pub(crate) const VOCAB: &str = "vocab.txt";
pub(crate) const RECORDS_DIR: &str = "records";
pub(crate) const STATS: &str = "stats.json";

const BATCH: usize = 4096;

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, StageError> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(StageError::InputMissing(path.to_path_buf())),
        Err(source) => Err(StageError::File {
            path: path.to_path_buf(),
            source,
        }),
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, StageError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| StageError::File {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| StageError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn record_input(m: &mut RunManifest, path: &Path) -> Result<(), StageError> {
    let digest = sha256_file(path).map_err(|source| StageError::File {
        path: path.to_path_buf(),
        source,
    })?;
    m.inputs.insert(path.display().to_string(), digest);
    Ok(())
}

pub(crate) fn record_output(m: &mut RunManifest, cfg: &PipelineConfig, rel: &str) -> Result<(), StageError> {
    let path = cfg.output.join(rel);
    let digest = sha256_file(&path).map_err(|source| StageError::File { path, source })?;
    m.outputs.insert(rel.to_string(), digest);
    Ok(())
}

fn finish<W: Write>(mut w: W) -> Result<(), StageError> {
    w.flush()?;
    Ok(())
}

/// A regular file, or the sorted regular files of a directory.
fn input_files(path: &Path) -> Result<Vec<PathBuf>, StageError> {
    if !path.exists() {
        return Err(StageError::InputMissing(path.to_path_buf()));
    }
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = fs::read_dir(path).map_err(|source| StageError::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let p = entry?.path();
        if p.is_file() {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

pub(crate) fn required_input(input: Option<&Path>, stage: Stage) -> Result<PathBuf, StageError> {
    input
        .map(Path::to_path_buf)
        .ok_or_else(|| ConfigError::Invalid(format!("{} needs io.input", stage.as_str())).into())
}

pub(crate) fn ingest(cfg: &PipelineConfig, input: Option<&Path>, m: &mut RunManifest) -> Result<(), StageError> {
    let source = required_input(input, Stage::Ingest)?;
    let files = input_files(&source)?;
    let mut sink = create(&cfg.output.join(INGESTED))?;
    let mut state = DedupState::new();
    let mut report = StageReport::new(Stage::Ingest);
    for file in &files {
        record_input(m, file)?;
        let stats = ingest_stream(open(file)?, &mut sink, &mut state)?;
        report.read += stats.read;
        report.emitted += stats.emitted;
        report.reject("malformed", stats.malformed);
        report.reject("duplicates_id", stats.duplicates_id);
        report.reject("duplicates_text", stats.duplicates_text);
    }
    finish(sink)?;
    record_output(m, cfg, INGESTED)?;
    log::info!("ingest: read {} emitted {}", report.read, report.emitted);
    m.stages.push(report);
    Ok(())
}

pub(crate) fn langid_train(cfg: &PipelineConfig, input: Option<&Path>, m: &mut RunManifest) -> Result<(), StageError> {
    let source = cfg.langid.train_corpus.as_deref().or(input);
    let samples = match source {
        Some(path) => {
            record_input(m, path)?;
            read_training_corpus(open(path)?)?
        }
        None => {
            m.warn("langid-train: no training corpus configured, using the bundled seed corpus");
            read_training_corpus(SEED_CORPUS.as_bytes())?
        }
    };
    let alpha = cfg.langid.alpha;
    for (name, range) in [(LANGID_A, cfg.langid.ngram_a), (LANGID_B, cfg.langid.ngram_b)] {
        let model: LangModel<f64> = LangModel::train(&samples, range, alpha)?;
        let mut w = create(&cfg.output.join(name))?;
        write_model(&model, &mut w)?;
        finish(w)?;
        record_output(m, cfg, name)?;
    }
    let mut report = StageReport::new(Stage::LangIdTrain);
    report.read = samples.len() as u64;
    report.emitted = samples.len() as u64;
    m.stages.push(report);
    Ok(())
}

pub type ModelPair = (LangModel<f64>, LangModel<f64>);

fn load_models(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<Option<ModelPair>, StageError> {
    if !cfg.langid.enabled {
        return Ok(None);
    }
    let trained = (cfg.output.join(LANGID_A), cfg.output.join(LANGID_B));
    let paths = match (&cfg.langid.model_a, &cfg.langid.model_b) {
        (Some(a), Some(b)) => Some((a.clone(), b.clone())),
        _ if trained.0.is_file() && trained.1.is_file() => Some(trained),
        _ => None,
    };
    let Some((a, b)) = paths else {
        m.warn("clean: no language models configured, using the bundled seed models");
        return Ok(Some(LangModel::seed_pair()));
    };
    record_input(m, &a)?;
    record_input(m, &b)?;
    Ok(Some((read_model(open(&a)?)?, read_model(open(&b)?)?)))
}

pub(crate) fn emoji_map(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<EmojiMap, StageError> {
    match &cfg.emoji_map {
        Some(path) => {
            record_input(m, path)?;
            Ok(EmojiMap::from_reader(open(path)?)?)
        }
        None => Ok(EmojiMap::builtin().clone()),
    }
}

const DECLARED_LANGUAGE: &str = "DeclaredLanguage";
const LANGUAGE_UNDETERMINED: &str = "LanguageUndetermined";
const MALFORMED: &str = "Malformed";

/// Everything the per-tweet cleaning step needs.
pub struct Cleaner {
    pub filter: FilterConfig,
    pub models: Option<ModelPair>,
    pub target: String,
    pub threshold: f64,
    pub check_declared: bool,
    pub emoji_map: EmojiMap,
}

/// Result of cleaning one tweet: translated text plus the pre-translation
/// text used for emoji frequencies, or a rejection reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanOutcome {
    Accepted { text: String, pre_translation: String },
    Rejected(&'static str),
}

impl Cleaner {
    pub fn clean(&self, tweet: &RawTweet) -> CleanOutcome {
        if self.check_declared {
            if let Some(lang) = &tweet.declared_lang {
                if !lang.eq_ignore_ascii_case(&self.target) {
                    return CleanOutcome::Rejected(DECLARED_LANGUAGE);
                }
            }
        }
        let unescaped = unescape_html(&tweet.text);
        let counts = count_entities(&unescaped);
        let normalized = normalize_entities(&unescaped);
        if let Some(reason) = apply_filters(&normalized, &counts, &self.filter).reason {
            return CleanOutcome::Rejected(reason.as_str());
        }
        if let Some((a, b)) = &self.models {
            match agreement_filter(&normalized, a, b, &self.target, self.threshold) {
                Ok(true) => {}
                Ok(false) => return CleanOutcome::Rejected(RejectReason::NotTargetLanguage.as_str()),
                Err(_) => return CleanOutcome::Rejected(LANGUAGE_UNDETERMINED),
            }
        }
        let text = translate_emojis(&normalized, &self.emoji_map);
        if text.trim().is_empty() {
            return CleanOutcome::Rejected(RejectReason::TooShort.as_str());
        }
        CleanOutcome::Accepted {
            text,
            pre_translation: normalized,
        }
    }
}

fn read_batch<I>(records: &mut I, batch: &mut Vec<Option<RawTweet>>) -> Result<(), StageError>
where
    I: Iterator<Item = Result<RawTweet, IngestError>>,
{
    batch.clear();
    for item in records.by_ref() {
        match item {
            Ok(t) => batch.push(Some(t)),
            Err(IngestError::Io(e)) => return Err(e.into()),
            Err(_) => batch.push(None),
        }
        if batch.len() == BATCH {
            break;
        }
    }
    Ok(())
}

fn default_input(cfg: &PipelineConfig, input: Option<&Path>, name: &str) -> PathBuf {
    input.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.join(name))
}

pub(crate) fn clean(cfg: &PipelineConfig, input: Option<&Path>, m: &mut RunManifest) -> Result<(), StageError> {
    let source = default_input(cfg, input, INGESTED);
    let reader = open(&source)?;
    record_input(m, &source)?;
    let cleaner = Cleaner {
        filter: cfg.filter,
        models: load_models(cfg, m)?,
        target: cfg.langid.target.clone(),
        threshold: cfg.langid.threshold,
        check_declared: cfg.langid.check_declared,
        emoji_map: emoji_map(cfg, m)?,
    };
    let mut sink = create(&cfg.output.join(CLEAN))?;
    let mut table = EmojiFrequencyTable::new();
    let mut report = StageReport::new(Stage::Clean);
    let mut records = read_records(reader);
    let mut batch = Vec::with_capacity(BATCH);
    loop {
        read_batch(&mut records, &mut batch)?;
        if batch.is_empty() {
            break;
        }
        let outcomes: Vec<Option<CleanOutcome>> = batch
            .par_iter()
            .map(|t| t.as_ref().map(|t| cleaner.clean(t)))
            .collect();
        for (tweet, outcome) in batch.iter_mut().zip(outcomes) {
            report.read += 1;
            match (tweet.take(), outcome) {
                (Some(mut tweet), Some(CleanOutcome::Accepted { text, pre_translation })) => {
                    table.add_text(&pre_translation);
                    tweet.text = text;
                    sink.write_all(serialize_record(&tweet).as_bytes())?;
                    sink.write_all(b"\n")?;
                    report.emitted += 1;
                }
                (_, Some(CleanOutcome::Rejected(reason))) => report.reject(reason, 1),
                _ => report.reject(MALFORMED, 1),
            }
        }
    }
    finish(sink)?;
    let mut freq = create(&cfg.output.join(EMOJI_FREQ))?;
    table.write_report(&mut freq)?;
    finish(freq)?;
    record_output(m, cfg, CLEAN)?;
    record_output(m, cfg, EMOJI_FREQ)?;
    if report.emitted == 0 {
        m.warn("clean: no tweet survived filtering, the corpus will be empty");
    }
    log::info!("clean: read {} emitted {}", report.read, report.emitted);
    m.stages.push(report);
    Ok(())
}

pub(crate) fn splitter(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<SentenceSplitter, StageError> {
    match &cfg.abbreviations {
        Some(path) => {
            record_input(m, path)?;
            Ok(SentenceSplitter::from_reader(open(path)?)?)
        }
        None => Ok(SentenceSplitter::default()),
    }
}

fn corpus_shard(shard: usize) -> String {
    format!("{CORPUS_DIR}/{}", shard_file_name(shard))
}

pub(crate) fn segment(cfg: &PipelineConfig, input: Option<&Path>, m: &mut RunManifest) -> Result<(), StageError> {
    let source = default_input(cfg, input, CLEAN);
    let reader = open(&source)?;
    record_input(m, &source)?;
    let splitter = splitter(cfg, m)?;
    let corpus = cfg.output.join(CORPUS_DIR);
    if corpus.is_dir() {
        // Stale shards from a run with more shards would otherwise be picked up.
        for entry in fs::read_dir(&corpus)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "txt") {
                fs::remove_file(p)?;
            }
        }
    }
    let mut writers = (0..cfg.shards)
        .map(|s| create(&cfg.output.join(corpus_shard(s))).map(DocumentWriter::new))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = StageReport::new(Stage::Segment);
    let mut records = read_records(reader);
    let mut batch = Vec::with_capacity(BATCH);
    let mut next_doc = 0usize;
    loop {
        read_batch(&mut records, &mut batch)?;
        if batch.is_empty() {
            break;
        }
        let docs: Vec<Option<Result<Document, SegmentError>>> = batch
            .par_iter()
            .map(|t| {
                t.as_ref()
                    .map(|t| split_sentences(&t.text, &splitter).and_then(Document::new))
            })
            .collect();
        for doc in docs {
            report.read += 1;
            match doc {
                Some(Ok(doc)) => {
                    writers[next_doc % cfg.shards].write(&doc)?;
                    next_doc += 1;
                    report.emitted += 1;
                }
                Some(Err(SegmentError::Io(e))) => return Err(e.into()),
                Some(Err(_)) => report.reject("unsplittable", 1),
                None => report.reject("malformed", 1),
            }
        }
    }
    for (s, w) in writers.into_iter().enumerate() {
        finish(w.finish()?)?;
        record_output(m, cfg, &corpus_shard(s))?;
    }
    m.stages.push(report);
    Ok(())
}

pub(crate) fn vocab(cfg: &PipelineConfig, input: Option<&Path>, m: &mut RunManifest) -> Result<(), StageError> {
    let base_path = cfg.base_vocab.as_deref().ok_or_else(|| {
        StageError::from(ConfigError::Invalid("vocab needs vocab.base".into()))
    })?;
    record_input(m, base_path)?;
    let base = Vocabulary::from_reader(open(base_path)?)?;
    let freq_path = default_input(cfg, input, EMOJI_FREQ);
    record_input(m, &freq_path)?;
    let table = EmojiFrequencyTable::read_report(open(&freq_path)?)?;
    let emojis = if table.is_empty() {
        m.warn("vocab: emoji frequency table is empty, adding no emojis");
        Vec::new()
    } else {
        select_top_emojis(&table, cfg.emoji_fraction)?
    };
    let extended = extend_vocabulary(&base, &TWEET_SPECIALS, &emojis)?;
    let mut w = create(&cfg.output.join(VOCAB))?;
    extended.write_to(&mut w)?;
    finish(w)?;
    record_output(m, cfg, VOCAB)?;
    let mut report = StageReport::new(Stage::Vocab);
    report.read = (TWEET_SPECIALS.len() + emojis.len()) as u64;
    report.emitted = (extended.len() - base.len()) as u64;
    report.reject("already_present", report.read - report.emitted);
    report.details.insert("base_size".into(), base.len() as u64);
    report.details.insert("final_size".into(), extended.len() as u64);
    report.details.insert("distinct_emojis".into(), table.total_distinct() as u64);
    m.stages.push(report);
    Ok(())
}

fn corpus_shards(dir: &Path) -> Result<Vec<PathBuf>, StageError> {
    if !dir.is_dir() {
        return Err(StageError::InputMissing(dir.to_path_buf()));
    }
    let mut shards: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    shards.retain(|p| {
        p.file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("corpus-") && n.ends_with(".txt"))
    });
    shards.sort();
    Ok(shards)
}

fn record_shard(shard: usize, ext: &str) -> String {
    format!("{RECORDS_DIR}/pretrain-{shard:05}.{ext}")
}

pub(crate) fn pretrain_data(cfg: &PipelineConfig, input: Option<&Path>, m: &mut RunManifest) -> Result<(), StageError> {
    let shards = corpus_shards(&default_input(cfg, input, CORPUS_DIR))?;
    let vocab_path = cfg.output.join(VOCAB);
    record_input(m, &vocab_path)?;
    let vocab = Vocabulary::from_reader(open(&vocab_path)?)?;
    let mut documents = Vec::new();
    let mut shard_of = Vec::new();
    for (s, path) in shards.iter().enumerate() {
        record_input(m, path)?;
        for doc in read_documents(open(path)?) {
            documents.push(doc?);
            shard_of.push(s);
        }
    }
    let pcfg = cfg.pretrain_config();
    let tokenizer = Tokenizer::new(vocab);
    let tokenized = tokenize_documents(&documents, &tokenizer);
    let usable = tokenized.iter().filter(|d| !d.is_empty()).count();
    let mut report = StageReport::new(Stage::PretrainData);
    report.read = documents.len() as u64;
    report.emitted = usable as u64;
    report.reject("degenerate", (documents.len() - usable) as u64);

    let mut per_shard: Vec<Vec<usize>> = vec![Vec::new(); shards.len()];
    let output = if usable == 0 {
        m.warn("pretrain-data: corpus has no usable documents, writing empty record files");
        None
    } else {
        let out = build_instances(&tokenized, tokenizer.vocab(), &pcfg)?;
        for (i, &(doc, _)) in out.origins.iter().enumerate() {
            per_shard[shard_of[doc]].push(i);
        }
        Some(out)
    };
    let header = RecordHeader {
        max_seq_length: u32::try_from(pcfg.max_seq_length)
            .map_err(|_| PretrainError::InvalidConfig("max_seq_length exceeds u32".into()))?,
        max_predictions_per_seq: u32::try_from(pcfg.max_predictions_per_seq)
            .map_err(|_| PretrainError::InvalidConfig("max_predictions_per_seq exceeds u32".into()))?,
    };
    let empty = Vec::new();
    let instances = output.as_ref().map_or(&empty, |o| &o.instances);
    for (s, indices) in per_shard.iter().enumerate() {
        let rel = record_shard(s, "rbtw");
        let mut writer = RecordWriter::new(create(&cfg.output.join(&rel))?, header)?;
        for &i in indices {
            writer.write(&instances[i])?;
        }
        finish(writer.finish()?)?;
        record_output(m, cfg, &rel)?;
        if cfg.debug_json {
            let rel = record_shard(s, "jsonl");
            let mut w = create(&cfg.output.join(&rel))?;
            write_debug_json(indices.iter().map(|&i| &instances[i]), &mut w)?;
            finish(w)?;
            record_output(m, cfg, &rel)?;
        }
    }
    if let Some(out) = &output {
        let s = &out.stats;
        for (k, v) in [
            ("instances", s.instances),
            ("random_next", s.random_next),
            ("forced_random_next", s.forced_random_next),
            ("masked_tokens", s.masked_tokens),
        ] {
            report.details.insert(k.into(), v as u64);
        }
    } else {
        report.details.insert("instances".into(), 0);
    }
    m.stages.push(report);
    Ok(())
}

#[derive(Debug, Default, Serialize)]
struct StatsFile {
    read: u64,
    malformed: u64,
    would_accept: u64,
    would_reject: BTreeMap<String, u64>,
    words: u64,
    mentions: u64,
    hashtags: u64,
    urls: u64,
    emojis: u64,
}

/// Corpus statistics and the filter verdicts the clean stage would reach,
/// language identification aside.
pub(crate) fn stats(cfg: &PipelineConfig, input: Option<&Path>, m: &mut RunManifest) -> Result<(), StageError> {
    let source = default_input(cfg, input, INGESTED);
    let reader = open(&source)?;
    record_input(m, &source)?;
    let mut out = StatsFile::default();
    let mut report = StageReport::new(Stage::Stats);
    for line in reader_records(reader) {
        out.read += 1;
        report.read += 1;
        let Some(tweet) = line? else {
            out.malformed += 1;
            report.reject("malformed", 1);
            continue;
        };
        let unescaped = unescape_html(&tweet.text);
        let counts = count_entities(&unescaped);
        let normalized = normalize_entities(&unescaped);
        out.words += word_count(&normalized) as u64;
        out.mentions += counts.mentions as u64;
        out.hashtags += counts.hashtags as u64;
        out.urls += counts.urls as u64;
        out.emojis += counts.emojis as u64;
        match apply_filters(&normalized, &counts, &cfg.filter).reason {
            None => {
                out.would_accept += 1;
                report.emitted += 1;
            }
            Some(r) => {
                *out.would_reject.entry(r.as_str().to_string()).or_default() += 1;
                report.reject(r.as_str(), 1);
            }
        }
    }
    let mut w = create(&cfg.output.join(STATS))?;
    serde_json::to_writer_pretty(&mut w, &out).map_err(io::Error::from)?;
    w.write_all(b"\n")?;
    finish(w)?;
    record_output(m, cfg, STATS)?;
    m.stages.push(report);
    Ok(())
}

fn reader_records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<Option<RawTweet>, StageError>> {
    read_records(reader).map(|r| match r {
        Ok(t) => Ok(Some(t)),
        Err(IngestError::Io(e)) => Err(e.into()),
        Err(_) => Ok(None),
    })
}
