mod common;

use std::fs;
use std::path::Path;

use tweetprep::config::PipelineConfig;
use tweetprep::pipeline::{run_pipeline, run_stage, RunManifest, Stage};
use tweetprep::pretrain::read_records;

use common::*;

fn config(dir: &Path, input: &Path) -> PipelineConfig {
    let vocab = dir.join("base-vocab.txt");
    write_base_vocab(&vocab);
    let mut cfg = PipelineConfig::default();
    cfg.input = Some(input.to_path_buf());
    cfg.output = dir.join("out");
    cfg.base_vocab = Some(vocab);
    cfg.set("langid.enabled", "false").unwrap();
    cfg.set("pretrain.dupe_factor", "2").unwrap();
    cfg.set("run.shards", "2").unwrap();
    cfg.set("run.seed", "7").unwrap();
    cfg
}

fn assert_conserved(m: &RunManifest) {
    for s in &m.stages {
        assert!(s.is_conserved(), "{}: read {} != emitted {} + {:?}", s.stage, s.read, s.emitted, s.rejected);
    }
}

fn record_count(out: &Path) -> usize {
    let mut n = 0;
    for entry in fs::read_dir(out.join("records")).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "rbtw") {
            n += read_records(fs::File::open(&p).unwrap()).unwrap().1.len();
        }
    }
    n
}

#[test]
fn thousand_tweet_archive_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("archive.jsonl");
    fs::write(&input, archive(1000, 11)).unwrap();
    let cfg = config(dir.path(), &input);
    let m = run_pipeline(&cfg).unwrap();
    assert_conserved(&m);

    let names: Vec<&str> = m.stages.iter().map(|s| s.stage.as_str()).collect();
    assert_eq!(names, ["ingest", "clean", "segment", "vocab", "pretrain-data"]);
    let ingest = m.stage(Stage::Ingest).unwrap();
    assert_eq!(ingest.read, 1000);
    let clean = m.stage(Stage::Clean).unwrap();
    assert_eq!(clean.read, ingest.emitted);
    let segment = m.stage(Stage::Segment).unwrap();
    assert_eq!(segment.read, clean.emitted);
    let pretrain = m.stage(Stage::PretrainData).unwrap();
    assert_eq!(pretrain.read, segment.emitted);
    assert_eq!(record_count(&cfg.output) as u64, pretrain.details["instances"]);
    assert!(pretrain.details["instances"] > 0);

    let vocab = m.stage(Stage::Vocab).unwrap();
    assert_eq!(vocab.details["final_size"], vocab.details["base_size"] + vocab.emitted);
    assert!(m.outputs.contains_key("records/pretrain-00000.rbtw"));
    assert!(m.outputs.contains_key("records/pretrain-00001.rbtw"));
    assert!(cfg.output.join("pipeline.manifest.json").is_file());
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("archive.jsonl");
    fs::write(&input, archive(400, 3)).unwrap();
    let mut digests = Vec::new();
    for (run, workers) in [(0, 1), (1, 8), (2, 1)] {
        let mut cfg = config(dir.path(), &input);
        cfg.output = dir.path().join(format!("out-{run}"));
        cfg.workers = workers;
        let m = run_pipeline(&cfg).unwrap();
        digests.push((tree_digests(&cfg.output), m.outputs));
    }
    assert_eq!(digests[0], digests[1]);
    assert_eq!(digests[0], digests[2]);
}

#[test]
fn all_spam_archive_gives_empty_corpus_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("spam.jsonl");
    let body: String = (0..50).map(|i| archive_line(i, &spam_text(i as usize)) + "\n").collect();
    fs::write(&input, body).unwrap();
    let cfg = config(dir.path(), &input);
    let m = run_pipeline(&cfg).unwrap();
    assert_conserved(&m);
    assert_eq!(m.stage(Stage::Clean).unwrap().emitted, 0);
    assert_eq!(m.stage(Stage::Segment).unwrap().emitted, 0);
    assert!(m.warnings.iter().any(|w| w.contains("empty")));
    assert_eq!(fs::read(cfg.output.join("corpus/corpus-00000.txt")).unwrap(), b"");
    assert_eq!(record_count(&cfg.output), 0);
}

#[test]
fn clean_stage_on_three_tweets() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("three.jsonl");
    let lines = [
        archive_line(1, "I went to the store yesterday and bought some bread and milk for the family"),
        archive_line(2, &spam_text(0)),
        archive_line(3, "Astăzi am fost la magazin și am cumpărat pâine și lapte pentru familie 😀"),
    ];
    fs::write(&input, lines.join("\n") + "\n").unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.input = Some(input);
    cfg.output = dir.path().join("out");
    let m = run_stage(Stage::Clean, &cfg).unwrap();
    let report = m.stage(Stage::Clean).unwrap();
    assert_eq!(report.read, 3);
    assert_eq!(report.emitted, 1);
    assert_eq!(report.rejected.get("NotTargetLanguage"), Some(&1));
    assert_eq!(report.rejected.get("TooManyMentions"), Some(&1));
    let clean = fs::read_to_string(cfg.output.join("clean.jsonl")).unwrap();
    assert!(clean.contains("\"id\":3"));
    assert!(!clean.contains('😀'));
    let freq = fs::read_to_string(cfg.output.join("emoji-freq.tsv")).unwrap();
    assert!(freq.starts_with("😀\t1"));
    assert!(cfg.output.join("clean.manifest.json").is_file());
}

#[test]
fn stats_on_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.jsonl");
    fs::write(&input, "").unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.input = Some(input);
    cfg.output = dir.path().join("out");
    let m = run_stage(Stage::Stats, &cfg).unwrap();
    let s = m.stage(Stage::Stats).unwrap();
    assert_eq!((s.read, s.emitted, s.total_rejected()), (0, 0, 0));
    let stats: serde_json::Value = serde_json::from_slice(&fs::read(cfg.output.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["read"], 0);
}

#[test]
fn pretrain_data_rerun_from_manifest_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("archive.jsonl");
    fs::write(&input, archive(300, 5)).unwrap();
    let mut cfg = config(dir.path(), &input);
    run_pipeline(&cfg).unwrap();
    cfg.input = None;
    let first = run_stage(Stage::PretrainData, &cfg).unwrap();
    let manifest = RunManifest::read(&cfg.output.join("pretrain-data.manifest.json")).unwrap();
    assert_eq!(manifest, first);
    let replayed = manifest.to_config().unwrap();
    let second = run_stage(Stage::PretrainData, &replayed).unwrap();
    assert_eq!(first.outputs, second.outputs);
    assert_eq!(first.inputs, second.inputs);
}

#[test]
fn missing_input_and_bad_config_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.output = dir.path().join("out");
    cfg.input = Some(dir.path().join("nope.jsonl"));
    let err = run_stage(Stage::Ingest, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().starts_with("ingest"));

    cfg.filter.min_words = 0;
    assert_eq!(run_stage(Stage::Ingest, &cfg).unwrap_err().exit_code(), 1);

    let mut cfg = PipelineConfig::default();
    cfg.output = dir.path().join("out");
    cfg.input = Some(dir.path().join("nope.jsonl"));
    assert_eq!(run_pipeline(&cfg).unwrap_err().exit_code(), 1);
}

#[test]
fn single_document_corpus_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("one.jsonl");
    fs::write(&input, archive_line(1, "Astăzi este o zi frumoasă. Mergem în parc cu prietenii.") + "\n").unwrap();
    let cfg = config(dir.path(), &input);
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().starts_with("pretrain-data"));
    let partial = RunManifest::read(&cfg.output.join("pipeline.manifest.json")).unwrap();
    assert_eq!(partial.stages.len(), 4);
}

#[test]
fn langid_train_then_clean_uses_trained_models() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("langid.tsv");
    fs::write(&corpus, tweetprep::langid::SEED_CORPUS).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.output = dir.path().join("out");
    cfg.langid.train_corpus = Some(corpus.clone());
    let m = run_stage(Stage::LangIdTrain, &cfg).unwrap();
    assert!(m.outputs.contains_key("langid-a.rlid"));
    assert!(m.warnings.is_empty());

    let input = dir.path().join("in.jsonl");
    fs::write(&input, archive_line(1, "Astăzi am fost la magazin și am cumpărat pâine și lapte") + "\n").unwrap();
    cfg.input = Some(input);
    let m = run_stage(Stage::Clean, &cfg).unwrap();
    assert!(m.inputs.keys().any(|k| k.ends_with("langid-a.rlid")));
    assert_eq!(m.stage(Stage::Clean).unwrap().emitted, 1);
}
