use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::stages::{create, emoji_map, open, record_input, record_output, required_input, VOCAB};
use super::{RunManifest, Stage, StageError, StageReport};
use crate::config::{ConfigError, PipelineConfig};
use crate::normalize::{normalize_entities, translate_emojis, unescape_html, EmojiMap};
use crate::tasks::{
    binarize, entity_f1, f1_multilabel, hamming_loss, load_task_dataset, mse, prf_singlelabel, read_conll,
    read_coroseof, read_red_v2, subset_accuracy, Averaging, BioMode, MetricReport, TaskExample, TaskKind, EMOTIONS,
};
use crate::vocab::{encode, Tokenizer, Vocabulary};

#[derive(Serialize)]
struct Prepared<'a> {
    example: &'a TaskExample,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_ids: Option<Vec<u32>>,
}

fn task_kind(cfg: &PipelineConfig) -> Result<TaskKind, StageError> {
    cfg.tasks
        .task
        .ok_or_else(|| ConfigError::Invalid("tasks.task is required".into()).into())
}

fn bio_mode(cfg: &PipelineConfig) -> BioMode {
    if cfg.tasks.bio_repair {
        BioMode::Repair
    } else {
        BioMode::Strict
    }
}

fn normalize_text(text: &str, map: &EmojiMap) -> String {
    translate_emojis(&normalize_entities(&unescape_html(text)), map)
}

/// The stage vocabulary if one was built, otherwise `vocab.base`.
fn task_vocab(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<Option<Vocabulary>, StageError> {
    let built = cfg.output.join(VOCAB);
    let path = if built.is_file() { Some(built) } else { cfg.base_vocab.clone() };
    let Some(path) = path else { return Ok(None) };
    record_input(m, &path)?;
    Ok(Some(Vocabulary::from_reader(open(&path)?)?))
}

pub(crate) fn task_prep(cfg: &PipelineConfig, input: Option<&Path>, m: &mut RunManifest) -> Result<(), StageError> {
    let task = task_kind(cfg)?;
    let source = required_input(input, Stage::TaskPrep)?;
    if !source.is_file() {
        return Err(StageError::InputMissing(source));
    }
    record_input(m, &source)?;
    let vocab = task_vocab(cfg, m)?;
    let map = emoji_map(cfg, m)?;
    let mut examples = load_task_dataset(&source, task, vocab.as_ref(), bio_mode(cfg))?;
    let tokenizer = vocab.map(Tokenizer::new);
    let rel = format!("task-{}.jsonl", task.as_str());
    let mut w = create(&cfg.output.join(&rel))?;
    for ex in &mut examples {
        let input_ids = match ex {
            TaskExample::Emotion(e) => {
                e.text = normalize_text(&e.text, &map);
                tokenizer.as_ref().map(|t| t.tokenize_ids(&e.text))
            }
            TaskExample::Sexism(s) => {
                s.text = normalize_text(&s.text, &map);
                tokenizer.as_ref().map(|t| t.tokenize_ids(&s.text))
            }
            TaskExample::Ner(n) => {
                let vocab = tokenizer.as_ref().map(Tokenizer::vocab);
                vocab.map(|v| encode(&crate::tasks::align_first_subwords(&n.words, v).pieces, v))
            }
        };
        let line = Prepared {
            example: ex,
            input_ids,
        };
        serde_json::to_writer(&mut w, &line).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    record_output(m, cfg, &rel)?;
    let mut report = StageReport::new(Stage::TaskPrep);
    report.read = examples.len() as u64;
    report.emitted = examples.len() as u64;
    m.stages.push(report);
    Ok(())
}

fn required_path(path: &Option<PathBuf>, key: &str) -> Result<PathBuf, StageError> {
    path.clone()
        .ok_or_else(|| ConfigError::Invalid(format!("eval needs {key}")).into())
}

fn averaging(cfg: &PipelineConfig) -> Result<Averaging, StageError> {
    cfg.tasks.averaging.ok_or_else(|| {
        ConfigError::Invalid("eval needs tasks.averaging (micro, macro or weighted)".into()).into()
    })
}

fn check_rows(gold: usize, pred: usize) -> Result<(), StageError> {
    if gold != pred {
        return Err(StageError::Data(format!(
            "gold has {gold} rows but predictions have {pred}"
        )));
    }
    Ok(())
}

type Reports = BTreeMap<String, MetricReport<f64>>;

fn eval_red_v2(cfg: &PipelineConfig, gold: &Path, pred: &Path) -> Result<(usize, Reports), StageError> {
    let avg = averaging(cfg)?;
    let g = read_red_v2(open(gold)?)?;
    let p = read_red_v2(open(pred)?)?;
    check_rows(g.len(), p.len())?;
    let mut out = Reports::new();

    let gl: Vec<Vec<u8>> = g.iter().map(|e| e.labels.to_vec()).collect();
    let pl: Vec<Vec<u8>> = p.iter().map(|e| e.labels.to_vec()).collect();
    let mut cls = MetricReport::new("red_v2/classification");
    cls.set("hamming_loss", hamming_loss(&gl, &pl)?)
        .set("accuracy", subset_accuracy(&gl, &pl)?)
        .set(format!("f1_{}", avg.as_str()), f1_multilabel(&gl, &pl, avg)?);
    out.insert("classification".into(), cls);

    let gi: Option<Vec<Vec<f64>>> = g.iter().map(|e| e.intensities.map(|x| x.to_vec())).collect();
    let pi: Option<Vec<Vec<f64>>> = p.iter().map(|e| e.intensities.map(|x| x.to_vec())).collect();
    if let (Some(gi), Some(pi)) = (gi, pi) {
        let t = cfg.tasks.threshold;
        let (gb, pb) = (binarize(&gi, t), binarize(&pi, t));
        let mut reg = MetricReport::new("red_v2/regression");
        reg.set("mse", mse(&gi, &pi)? * cfg.tasks.mse_scale)
            .set("hamming_loss", hamming_loss(&gb, &pb)?)
            .set("accuracy", subset_accuracy(&gb, &pb)?)
            .set(format!("f1_{}", avg.as_str()), f1_multilabel(&gb, &pb, avg)?);
        out.insert("regression".into(), reg);
    }
    debug_assert_eq!(EMOTIONS.len(), 7);
    Ok((g.len(), out))
}

fn eval_coroseof(cfg: &PipelineConfig, gold: &Path, pred: &Path) -> Result<(usize, Reports), StageError> {
    let avg = averaging(cfg)?;
    let g = read_coroseof(open(gold)?)?;
    let p = read_coroseof(open(pred)?)?;
    check_rows(g.len(), p.len())?;
    let mut out = Reports::new();

    let gb: Vec<&str> = g.iter().map(|e| e.binary_label.as_str()).collect();
    let pb: Vec<&str> = p.iter().map(|e| e.binary_label.as_str()).collect();
    out.insert("binary".into(), prf_singlelabel(&gb, &pb, avg)?);

    let (gk, pk): (Vec<&str>, Vec<&str>) = g
        .iter()
        .zip(&p)
        .filter_map(|(ge, pe)| {
            let kind = ge.threeway_label?;
            Some((kind.as_str(), pe.threeway_label.map_or("not_sexist", |k| k.as_str())))
        })
        .unzip();
    if !gk.is_empty() {
        out.insert("threeway".into(), prf_singlelabel(&gk, &pk, avg)?);
    }
    Ok((g.len(), out))
}

fn eval_ner(cfg: &PipelineConfig, gold: &Path, pred: &Path) -> Result<(usize, Reports), StageError> {
    let mode = bio_mode(cfg);
    let g = read_conll(open(gold)?, mode)?;
    let p = read_conll(open(pred)?, mode)?;
    check_rows(g.len(), p.len())?;
    for (i, ((gw, _), (pw, _))) in g.iter().zip(&p).enumerate() {
        if gw.len() != pw.len() {
            return Err(StageError::Data(format!(
                "sentence {} has {} gold tokens but {} predicted",
                i + 1,
                gw.len(),
                pw.len()
            )));
        }
    }
    let gt: Vec<Vec<String>> = g.into_iter().map(|(_, t)| t).collect();
    let pt: Vec<Vec<String>> = p.into_iter().map(|(_, t)| t).collect();
    let mut out = Reports::new();
    out.insert("entities".into(), entity_f1(&gt, &pt, mode)?);
    Ok((gt.len(), out))
}

pub(crate) fn eval(cfg: &PipelineConfig, m: &mut RunManifest) -> Result<(), StageError> {
    let task = task_kind(cfg)?;
    let gold = required_path(&cfg.tasks.gold, "tasks.gold")?;
    let pred = required_path(&cfg.tasks.predictions, "tasks.predictions")?;
    for p in [&gold, &pred] {
        if !p.is_file() {
            return Err(StageError::InputMissing(p.clone()));
        }
        record_input(m, p)?;
    }
    let (rows, reports) = match task {
        TaskKind::RedV2 => eval_red_v2(cfg, &gold, &pred)?,
        TaskKind::CoRoSeOf => eval_coroseof(cfg, &gold, &pred)?,
        TaskKind::Ner => eval_ner(cfg, &gold, &pred)?,
    };
    let rel = format!("eval-{}.json", task.as_str());
    let mut w = create(&cfg.output.join(&rel))?;
    serde_json::to_writer_pretty(&mut w, &reports).map_err(io::Error::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    record_output(m, cfg, &rel)?;
    for (name, r) in &reports {
        for (k, v) in &r.scalars {
            log::info!("eval {name}: {k} = {v:.6}");
        }
    }
    let mut report = StageReport::new(Stage::Eval);
    report.read = rows as u64;
    report.emitted = rows as u64;
    m.stages.push(report);
    Ok(())
}
