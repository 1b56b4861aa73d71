use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::TaskError;
use crate::scalar::Scalar;

/// F1 averaging scheme. There is deliberately no default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Micro,
    Macro,
    Weighted,
}

impl Averaging {
    pub const ALL: [Averaging; 3] = [Averaging::Micro, Averaging::Macro, Averaging::Weighted];

    pub fn as_str(self) -> &'static str {
        match self {
            Averaging::Micro => "micro",
            Averaging::Macro => "macro",
            Averaging::Weighted => "weighted",
        }
    }
}

impl std::fmt::Display for Averaging {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "micro" => Ok(Averaging::Micro),
            "macro" => Ok(Averaging::Macro),
            "weighted" => Ok(Averaging::Weighted),
            other => Err(format!("unknown averaging {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScores<F> {
    pub label: String,
    pub precision: F,
    pub recall: F,
    pub f1: F,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport<F> {
    pub task: String,
    pub scalars: BTreeMap<String, F>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_class: Vec<ClassScores<F>>,
}

impl<F: Scalar> MetricReport<F> {
    pub fn new(task: impl Into<String>) -> Self {
        Self {
            task: task.into(),
            scalars: BTreeMap::new(),
            per_class: Vec::new(),
        }
    }

    pub fn set(&mut self, name: impl Into<String>, value: F) -> &mut Self {
        self.scalars.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<F> {
        self.scalars.get(name).copied()
    }

    pub fn class(&self, label: &str) -> Option<&ClassScores<F>> {
        self.per_class.iter().find(|c| c.label == label)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Confusion {
    fn scores<F: Scalar>(&self) -> (F, F, F) {
        let p = F::ratio(self.tp, self.tp + self.fp);
        let r = F::ratio(self.tp, self.tp + self.fn_);
        (p, r, harmonic(p, r))
    }

    fn support(&self) -> usize {
        self.tp + self.fn_
    }
}

fn harmonic<F: Scalar>(p: F, r: F) -> F {
    if p + r == F::zero() {
        F::zero()
    } else {
        F::of(2.0) * p * r / (p + r)
    }
}

/// Returns the column count after checking both matrices are rectangular, equal-shaped and binary.
fn check_binary(y_true: &[Vec<u8>], y_pred: &[Vec<u8>]) -> Result<usize, TaskError> {
    if y_true.len() != y_pred.len() {
        return Err(TaskError::ShapeMismatch(format!("{} vs {} rows", y_true.len(), y_pred.len())));
    }
    let width = y_true.first().map_or(0, Vec::len);
    for (i, (t, p)) in y_true.iter().zip(y_pred).enumerate() {
        if t.len() != width || p.len() != width {
            return Err(TaskError::ShapeMismatch(format!(
                "row {i} has {} and {} columns, expected {width}",
                t.len(),
                p.len()
            )));
        }
        if let Some(&bad) = t.iter().chain(p).find(|&&v| v > 1) {
            return Err(TaskError::NonBinary(bad));
        }
    }
    Ok(width)
}

pub fn hamming_loss<F: Scalar>(y_true: &[Vec<u8>], y_pred: &[Vec<u8>]) -> Result<F, TaskError> {
    let width = check_binary(y_true, y_pred)?;
    let wrong: usize = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| t.iter().zip(p).filter(|(a, b)| a != b).count())
        .sum();
    Ok(F::ratio(wrong, y_true.len() * width))
}

pub fn subset_accuracy<F: Scalar>(y_true: &[Vec<u8>], y_pred: &[Vec<u8>]) -> Result<F, TaskError> {
    check_binary(y_true, y_pred)?;
    let exact = y_true.iter().zip(y_pred).filter(|(t, p)| t == p).count();
    Ok(F::ratio(exact, y_true.len()))
}

fn averaged<F: Scalar>(classes: &[Confusion], averaging: Averaging) -> (F, F, F) {
    match averaging {
        Averaging::Micro => {
            let total = classes.iter().fold(Confusion::default(), |acc, c| Confusion {
                tp: acc.tp + c.tp,
                fp: acc.fp + c.fp,
                fn_: acc.fn_ + c.fn_,
            });
            total.scores()
        }
        Averaging::Macro => {
            let n = F::of_count(classes.len().max(1));
            let (mut p, mut r, mut f) = (F::zero(), F::zero(), F::zero());
            for c in classes {
                let (cp, cr, cf) = c.scores::<F>();
                p = p + cp;
                r = r + cr;
                f = f + cf;
            }
            (p / n, r / n, f / n)
        }
        Averaging::Weighted => {
            let total: usize = classes.iter().map(Confusion::support).sum();
            if total == 0 {
                return (F::zero(), F::zero(), F::zero());
            }
            let (mut p, mut r, mut f) = (F::zero(), F::zero(), F::zero());
            for c in classes {
                let w = F::of_count(c.support());
                let (cp, cr, cf) = c.scores::<F>();
                p = p + w * cp;
                r = r + w * cr;
                f = f + w * cf;
            }
            let total = F::of_count(total);
            (p / total, r / total, f / total)
        }
    }
}

pub fn f1_multilabel<F: Scalar>(y_true: &[Vec<u8>], y_pred: &[Vec<u8>], averaging: Averaging) -> Result<F, TaskError> {
    let width = check_binary(y_true, y_pred)?;
    let mut classes = vec![Confusion::default(); width];
    for (t, p) in y_true.iter().zip(y_pred) {
        for (j, c) in classes.iter_mut().enumerate() {
            match (t[j], p[j]) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (1, 0) => c.fn_ += 1,
                _ => {}
            }
        }
    }
    Ok(averaged::<F>(&classes, averaging).2)
}

pub fn mse<F: Scalar>(y_true: &[Vec<F>], y_pred: &[Vec<F>]) -> Result<F, TaskError> {
    if y_true.len() != y_pred.len() {
        return Err(TaskError::ShapeMismatch(format!("{} vs {} rows", y_true.len(), y_pred.len())));
    }
    let mut sum = F::zero();
    let mut n = 0;
    for (i, (t, p)) in y_true.iter().zip(y_pred).enumerate() {
        if t.len() != p.len() || t.len() != y_true[0].len() {
            return Err(TaskError::ShapeMismatch(format!("row {i} width differs")));
        }
        for (&a, &b) in t.iter().zip(p) {
            sum = sum + (a - b) * (a - b);
        }
        n += t.len();
    }
    Ok(if n == 0 { F::zero() } else { sum / F::of_count(n) })
}

/// `1` where the value is at least `threshold`.
pub fn binarize<F: Scalar>(values: &[Vec<F>], threshold: F) -> Vec<Vec<u8>> {
    values
        .iter()
        .map(|row| row.iter().map(|&v| u8::from(v >= threshold)).collect())
        .collect()
}

/// Per-class and averaged precision/recall/F1 for single-label classification.
///
/// Classes are the sorted union of labels seen in either list. Scalars are
/// `precision`, `recall`, `f1` under `averaging`, plus `accuracy`.
pub fn prf_singlelabel<F: Scalar, S: AsRef<str>>(
    y_true: &[S],
    y_pred: &[S],
    averaging: Averaging,
) -> Result<MetricReport<F>, TaskError> {
    if y_true.len() != y_pred.len() {
        return Err(TaskError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let labels: BTreeSet<&str> = y_true.iter().chain(y_pred).map(AsRef::as_ref).collect();
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut classes = vec![Confusion::default(); labels.len()];
    let mut correct = 0;
    for (t, p) in y_true.iter().zip(y_pred) {
        let (t, p) = (index[t.as_ref()], index[p.as_ref()]);
        if t == p {
            classes[t].tp += 1;
            correct += 1;
        } else {
            classes[p].fp += 1;
            classes[t].fn_ += 1;
        }
    }
    let mut report = MetricReport::new("singlelabel");
    let (p, r, f) = averaged::<F>(&classes, averaging);
    report
        .set("precision", p)
        .set("recall", r)
        .set("f1", f)
        .set("accuracy", F::ratio(correct, y_true.len()));
    report.per_class = labels
        .iter()
        .zip(&classes)
        .map(|(label, c)| {
            let (precision, recall, f1) = c.scores();
            ClassScores {
                label: label.to_string(),
                precision,
                recall,
                f1,
                support: c.support(),
            }
        })
        .collect();
    Ok(report)
}
