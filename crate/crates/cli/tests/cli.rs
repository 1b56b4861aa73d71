use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tweetprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tweetprep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tweet(id: u64, text: &str) -> String {
    format!(r#"{{"id":{id},"text":"{text}","created_at":"2021-03-01T12:00:00Z"}}"#)
}

const SENTENCES: &[&str] = &[
    "Astăzi este o zi frumoasă și mergem în parc cu prietenii.",
    "Nu știu ce să mai fac cu atâtea teme pentru mâine.",
    "Am văzut un film foarte bun aseară la cinema.",
    "Guvernul a anunțat noi măsuri pentru economie.",
    "Vremea este rece în această dimineață la munte.",
    "Echipa noastră a câștigat meciul de duminică.",
];

fn write_archive(path: &Path, n: usize) {
    let mut body = String::new();
    for i in 0..n {
        let a = SENTENCES[i % SENTENCES.len()];
        let b = SENTENCES[(i * 7 + 3) % SENTENCES.len()];
        body.push_str(&tweet(i as u64, &format!("{a} {b} Mesajul {i}.")));
        body.push('\n');
    }
    fs::write(path, body).unwrap();
}

fn write_vocab(path: &Path) {
    let mut tokens: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"].map(String::from).to_vec();
    for c in "abcdefghijklmnopqrstuvwxyzăâîșțABCDEFGHIJKLMNOPQRSTUVWXYZĂÂÎȘȚ0123456789".chars() {
        tokens.push(c.to_string());
        tokens.push(format!("##{c}"));
    }
    tokens.extend([".", ",", "!", "?"].map(String::from));
    fs::write(path, tokens.join("\n") + "\n").unwrap();
}

#[test]
fn print_config_shows_defaults_and_precedence() {
    let out = tweetprep(&["--print-config"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("filter.min_words=5"));
    assert!(text.contains("filter.max_words=256"));
    assert!(text.contains("pretrain.dupe_factor=10"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# test\nfilter.min_words=8\nfilter.max_urls=1\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let text = stdout(&tweetprep(&["--config", cfg, "--print-config"]));
    assert!(text.contains("filter.min_words=8"));
    assert!(text.contains("filter.max_urls=1"));
    let text = stdout(&tweetprep(&["--config", cfg, "--min-words", "2", "--print-config"]));
    assert!(text.contains("filter.min_words=2"));
    assert!(text.contains("filter.max_urls=1"));
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(code(&tweetprep(&[])), 1);
    assert_eq!(code(&tweetprep(&["frobnicate"])), 1);
    assert_eq!(code(&tweetprep(&["--set", "filter.bogus=1", "stats"])), 1);
    assert_eq!(code(&tweetprep(&["--min-words", "0", "stats"])), 1);
    assert_eq!(code(&tweetprep(&["--help"])), 0);
}

#[test]
fn missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let missing = dir.path().join("missing.jsonl");
    let out = tweetprep(&["ingest", "--input", missing.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest"));
}

#[test]
fn bad_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.tsv");
    fs::write(&gold, "un text\tnu exista\n").unwrap();
    let out = tweetprep(&[
        "eval",
        "--task",
        "coroseof",
        "--averaging",
        "macro",
        "--gold",
        gold.to_str().unwrap(),
        "--predictions",
        gold.to_str().unwrap(),
        "--output",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_red_v2_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.tsv");
    let pred = dir.path().join("pred.tsv");
    fs::write(&gold, "a\t1\t0\t0\t0\t0\t0\t0\nb\t0\t1\t0\t0\t0\t0\t0\n").unwrap();
    fs::write(&pred, "a\t1\t0\t0\t0\t0\t0\t0\nb\t0\t0\t1\t0\t0\t0\t0\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = tweetprep(&[
        "eval",
        "--task",
        "red_v2",
        "--averaging",
        "micro",
        "--gold",
        gold.to_str().unwrap(),
        "--predictions",
        pred.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("eval-red_v2.json")).unwrap()).unwrap();
    let scalars = &report["classification"]["scalars"];
    assert!((scalars["hamming_loss"].as_f64().unwrap() - 2.0 / 14.0).abs() < 1e-12);
    assert_eq!(scalars["accuracy"].as_f64().unwrap(), 0.5);
    assert_eq!(scalars["f1_micro"].as_f64().unwrap(), 0.5);
}

#[test]
fn eval_without_averaging_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.tsv");
    fs::write(&gold, "a\t1\t0\t0\t0\t0\t0\t0\n").unwrap();
    let g = gold.to_str().unwrap();
    let out_dir = dir.path().join("out");
    let out = tweetprep(&["eval", "--task", "red_v2", "--gold", g, "--predictions", g, "--output", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn pipeline_then_replay_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("archive.jsonl");
    write_archive(&archive, 60);
    let vocab = dir.path().join("vocab.txt");
    write_vocab(&vocab);
    let out_dir = dir.path().join("out");
    let out = tweetprep(&[
        "pipeline",
        "--input",
        archive.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--set",
        &format!("vocab.base={}", vocab.display()),
        "--set",
        "langid.enabled=false",
        "--set",
        "pretrain.dupe_factor=2",
        "--seed",
        "3",
        "--workers",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for stage in ["ingest", "clean", "segment", "vocab", "pretrain-data"] {
        assert!(text.contains(stage), "{text}");
    }
    let records = out_dir.join("records/pretrain-00000.rbtw");
    let first = fs::read(&records).unwrap();
    assert!(first.len() > 14);

    let manifest = out_dir.join("pipeline.manifest.json");
    let out = tweetprep(&["pipeline", "--replay", manifest.to_str().unwrap(), "--workers", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&records).unwrap(), first);
}

#[test]
fn stats_on_empty_input_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out_dir = dir.path().join("out");
    let out = tweetprep(&["stats", "--input", empty.to_str().unwrap(), "--output", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out_dir.join("stats.manifest.json").is_file());
}
