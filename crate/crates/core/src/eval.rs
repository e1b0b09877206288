//! Confusion-matrix metrics with PBT as the positive class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Class;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{predictions} predictions for {truths} ground-truth labels")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("cannot compute metrics on an empty confusion matrix")]
    Empty,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// The same outcomes with MT treated as the positive class.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            tn: self.tp,
            fp: self.fn_,
            fn_: self.fp,
        }
    }

    pub fn record(&mut self, predicted: Class, truth: Class) {
        match (predicted, truth) {
            (Class::Pbt, Class::Pbt) => self.tp += 1,
            (Class::Mt, Class::Mt) => self.tn += 1,
            (Class::Pbt, Class::Mt) => self.fp += 1,
            (Class::Mt, Class::Pbt) => self.fn_ += 1,
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }
}

pub fn confusion(predicted: &[Class], truth: &[Class]) -> Result<ConfusionMatrix, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predicted.len(),
            truths: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        cm.record(p, t);
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub pbt: ClassMetrics,
    pub mt: ClassMetrics,
    /// Unweighted mean of the two per-class rows.
    pub macro_avg: ClassMetrics,
    pub mcc: f64,
}

impl Metrics {
    pub fn class(&self, class: Class) -> &ClassMetrics {
        match class {
            Class::Pbt => &self.pbt,
            Class::Mt => &self.mt,
        }
    }
}

/// `num / den`, or 0 when `den` is 0.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn positive_class(cm: &ConfusionMatrix) -> ClassMetrics {
    let (tp, fp, fn_) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    ClassMetrics {
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
    }
}

pub fn macro_average(a: &ClassMetrics, b: &ClassMetrics) -> ClassMetrics {
    ClassMetrics {
        precision: (a.precision + b.precision) / 2.0,
        recall: (a.recall + b.recall) / 2.0,
        f1: (a.f1 + b.f1) / 2.0,
    }
}

pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let radicand = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if radicand == 0.0 {
        return 0.0;
    }
    ((tp * tn - fp * fn_) / radicand.sqrt()).clamp(-1.0, 1.0)
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let pbt = positive_class(cm);
    let mt = positive_class(&cm.swapped());
    Ok(Metrics {
        accuracy: (cm.tp + cm.tn) as f64 / total as f64,
        pbt,
        mt,
        macro_avg: macro_average(&pbt, &mt),
        mcc: mcc(cm),
    })
}

/// Mean and population standard deviation of each metric across folds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean: Metrics,
    pub std: Metrics,
}

fn flatten(m: &Metrics) -> [f64; 11] {
    let c = |x: &ClassMetrics| [x.precision, x.recall, x.f1];
    let [a, b, d] = c(&m.pbt);
    let [e, f, g] = c(&m.mt);
    let [h, i, j] = c(&m.macro_avg);
    [m.accuracy, a, b, d, e, f, g, h, i, j, m.mcc]
}

fn unflatten(v: [f64; 11]) -> Metrics {
    let c = |i: usize| ClassMetrics {
        precision: v[i],
        recall: v[i + 1],
        f1: v[i + 2],
    };
    Metrics {
        accuracy: v[0],
        pbt: c(1),
        mt: c(4),
        macro_avg: c(7),
        mcc: v[10],
    }
}

pub fn summarize(folds: &[Metrics]) -> Option<MetricsSummary> {
    if folds.is_empty() {
        return None;
    }
    let n = folds.len() as f64;
    let rows: Vec<[f64; 11]> = folds.iter().map(flatten).collect();
    let mut mean = [0.0; 11];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut var = [0.0; 11];
    for r in &rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    Some(MetricsSummary {
        mean: unflatten(mean),
        std: unflatten(var.map(f64::sqrt)),
    })
}

/// Metrics laid out as rows Accuracy, Precision, Recall, F1-score, MCC and
/// columns PBT, MT, Overall. Accuracy and MCC appear under Overall only.
pub fn render_metrics_table(m: &Metrics, delimiter: char) -> String {
    let d = delimiter;
    let f = |v: f64| format!("{v:.3}");
    let mut out = format!("Metric{d}PBT{d}MT{d}Overall\n");
    out += &format!("Accuracy{d}-{d}-{d}{}\n", f(m.accuracy));
    let rows: [(&str, fn(&ClassMetrics) -> f64); 3] = [
        ("Precision", |c| c.precision),
        ("Recall", |c| c.recall),
        ("F1-score", |c| c.f1),
    ];
    for (name, get) in rows {
        out += &format!(
            "{name}{d}{}{d}{}{d}{}\n",
            f(get(&m.pbt)),
            f(get(&m.mt)),
            f(get(&m.macro_avg))
        );
    }
    out += &format!("MCC{d}-{d}-{d}{}\n", f(m.mcc));
    out
}
