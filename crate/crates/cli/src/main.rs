use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tweetprep::config::{ConfigError, PipelineConfig};
use tweetprep::pipeline::{run_pipeline, run_stage, PipelineError, RunManifest, Stage};

/// Tweet corpus preparation: ingest, clean, segment, vocabulary, pretraining
/// records and downstream task evaluation.
#[derive(Debug, Parser)]
#[command(name = "tweetprep", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Flat `section.key=value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Re-run with the config recorded in a manifest.
    #[arg(long, global = true)]
    replay: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    shards: Option<usize>,
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    min_words: Option<usize>,
    #[arg(long, global = true)]
    max_words: Option<usize>,
    #[arg(long, global = true)]
    max_mentions: Option<usize>,
    #[arg(long, global = true)]
    max_hashtags: Option<usize>,
    #[arg(long, global = true)]
    max_urls: Option<usize>,
    #[arg(long, global = true)]
    max_emojis: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Debug, Args, Default)]
struct TaskOpts {
    /// red_v2, coroseof or ner.
    #[arg(long)]
    task: Option<String>,
    /// micro, macro or weighted.
    #[arg(long)]
    averaging: Option<String>,
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and deduplicate a raw archive.
    Ingest,
    /// Train the two language-identification models.
    LangidTrain,
    /// Normalize, filter and translate emojis.
    Clean,
    /// Split tweets into sentences and write document shards.
    Segment,
    /// Extend the base vocabulary with tweet tokens and frequent emojis.
    Vocab,
    /// Generate masked pretraining records.
    PretrainData,
    /// Normalize and tokenize a downstream dataset.
    TaskPrep(TaskOpts),
    /// Score predictions against gold labels.
    Eval(TaskOpts),
    /// Corpus statistics and would-be filter verdicts.
    Stats,
    /// Run ingest through pretrain-data.
    Pipeline,
}

impl Command {
    fn stage(&self) -> Option<Stage> {
        Some(match self {
            Command::Ingest => Stage::Ingest,
            Command::LangidTrain => Stage::LangIdTrain,
            Command::Clean => Stage::Clean,
            Command::Segment => Stage::Segment,
            Command::Vocab => Stage::Vocab,
            Command::PretrainData => Stage::PretrainData,
            Command::TaskPrep(_) => Stage::TaskPrep,
            Command::Eval(_) => Stage::Eval,
            Command::Stats => Stage::Stats,
            Command::Pipeline => return None,
        })
    }

    fn task_opts(&self) -> Option<&TaskOpts> {
        match self {
            Command::TaskPrep(t) | Command::Eval(t) => Some(t),
            _ => None,
        }
    }
}

/// Layers, lowest precedence first: defaults, replayed manifest, config
/// file, `--set` pairs, dedicated flags.
fn build_config(global: &GlobalOpts, command: Option<&Command>) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &global.replay {
        Some(path) => RunManifest::read(path)?.to_config()?,
        None => PipelineConfig::default(),
    };
    if let Some(path) = &global.config {
        let file = File::open(path).map_err(ConfigError::Io)?;
        cfg.apply_reader(BufReader::new(file))?;
    }
    for pair in &global.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    let mut flags: Vec<(&str, String)> = Vec::new();
    let path = |p: &PathBuf| p.display().to_string();
    let numeric = [
        ("filter.min_words", global.min_words),
        ("filter.max_words", global.max_words),
        ("filter.max_mentions", global.max_mentions),
        ("filter.max_hashtags", global.max_hashtags),
        ("filter.max_urls", global.max_urls),
        ("filter.max_emojis", global.max_emojis),
        ("run.workers", global.workers),
        ("run.shards", global.shards),
    ];
    flags.extend(numeric.iter().filter_map(|(k, v)| v.map(|v| (*k, v.to_string()))));
    if let Some(seed) = global.seed {
        flags.push(("run.seed", seed.to_string()));
    }
    if let Some(p) = &global.input {
        flags.push(("io.input", path(p)));
    }
    if let Some(p) = &global.output {
        flags.push(("io.output", path(p)));
    }
    if let Some(t) = command.and_then(Command::task_opts) {
        flags.extend(t.task.clone().map(|v| ("tasks.task", v)));
        flags.extend(t.averaging.clone().map(|v| ("tasks.averaging", v)));
        flags.extend(t.gold.as_ref().map(|p| ("tasks.gold", path(p))));
        flags.extend(t.predictions.as_ref().map(|p| ("tasks.predictions", path(p))));
    }
    for (k, v) in &flags {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = build_config(&cli.global, cli.command.as_ref())?;
    if cli.global.print_config {
        print!("{}", cfg.render());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(ConfigError::Invalid("no subcommand given, see --help".into()).into());
    };
    let manifest = match command.stage() {
        Some(stage) => run_stage(stage, &cfg)?,
        None => run_pipeline(&cfg)?,
    };
    for s in &manifest.stages {
        let rejected: Vec<String> = s
            .rejected
            .iter()
            .filter(|(_, n)| **n > 0)
            .map(|(k, n)| format!("{k}={n}"))
            .collect();
        println!(
            "{:<14} read {:>9}  emitted {:>9}  rejected [{}]",
            s.stage,
            s.read,
            s.emitted,
            rejected.join(", ")
        );
    }
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            // Printing help or usage; nothing useful to do if stdout is closed.
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("tweetprep").chain(args.iter().copied())).unwrap()
    }

    fn config(args: &[&str]) -> PipelineConfig {
        let cli = parse(args);
        build_config(&cli.global, cli.command.as_ref()).unwrap()
    }

    #[test]
    fn defaults_without_flags() {
        assert_eq!(config(&["stats"]), PipelineConfig::default());
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "filter.min_words=7\nfilter.max_urls=2\nrun.seed=9").unwrap();
        let p = file.path().to_str().unwrap();

        let from_file = config(&["--config", p, "clean"]);
        assert_eq!(from_file.filter.min_words, 7);
        assert_eq!(from_file.filter.max_urls, 2);
        assert_eq!(from_file.seed, 9);
        assert_eq!(from_file.filter.max_words, 256);

        let flagged = config(&["--config", p, "--min-words", "3", "--seed", "1", "clean"]);
        assert_eq!(flagged.filter.min_words, 3);
        assert_eq!(flagged.filter.max_urls, 2);
        assert_eq!(flagged.seed, 1);
        assert_eq!(flagged.pretrain_config().seed, 1);

        let set = config(&["--config", p, "--set", "filter.min_words=4", "clean"]);
        assert_eq!(set.filter.min_words, 4);
        let both = config(&["--config", p, "--set", "filter.min_words=4", "--min-words", "6", "clean"]);
        assert_eq!(both.filter.min_words, 6);
    }

    #[test]
    fn task_flags_map_to_keys() {
        let cfg = config(&["eval", "--task", "ner", "--averaging", "macro", "--gold", "g.txt"]);
        assert_eq!(cfg.get("tasks.task").unwrap(), "ner");
        assert_eq!(cfg.get("tasks.averaging").unwrap(), "macro");
        assert_eq!(cfg.tasks.gold, Some(PathBuf::from("g.txt")));
    }

    #[test]
    fn bad_override_is_config_error() {
        let cli = parse(&["--set", "filter.nope=1", "clean"]);
        let err = build_config(&cli.global, cli.command.as_ref()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let cli = parse(&["--set", "novalue", "clean"]);
        assert_eq!(build_config(&cli.global, None).unwrap_err().exit_code(), 1);
    }
}
