use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{evaluate, train_model, TrainConfig, TrainError, TrainReport};
use crate::corpus::{stratified_kfold, stratified_split_lenient, Class};
use crate::dataset::Example;
use crate::eval::{summarize, Metrics, MetricsSummary};
use crate::exec::Execution;
use crate::model::{Model, ModelConfig};

pub const GRID_LEARNING_RATES: [f64; 6] = [1e-4, 5e-5, 3e-5, 2e-5, 1e-5, 1e-6];
pub const GRID_BATCH_SIZES: [usize; 4] = [64, 128, 256, 512];

fn pick(examples: &[Example], idx: &[usize]) -> Vec<Example> {
    idx.iter().map(|&i| examples[i].clone()).collect()
}

fn ids(examples: &[Example]) -> Vec<String> {
    examples.iter().map(|e| e.patent_id.clone()).collect()
}

fn warn_single_class(examples: &[Example], what: &str) {
    let first = examples.first().map(|e| e.label);
    if examples.iter().all(|e| Some(e.label) == first) {
        log::warn!("{what} contains a single class; metrics will be degenerate");
    }
}

/// Splits `examples` into (train, validation) with a stratified
/// `validation_fraction` share held out.
fn inner_split(
    examples: Vec<Example>,
    config: &TrainConfig,
    seed: u64,
) -> Result<(Vec<Example>, Vec<Example>), TrainError> {
    let labels: Vec<Class> = examples.iter().map(|e| e.label).collect();
    let split = stratified_split_lenient(&labels, 1.0 - config.validation_fraction, seed)?;
    Ok((pick(&examples, &split.train), pick(&examples, &split.test)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// 1-based.
    pub fold: usize,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub metrics: Metrics,
    pub report: TrainReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub summary: MetricsSummary,
}

const FOLD_COLUMNS: &str =
    "fold,n_test,best_epoch,accuracy,precision_pbt,recall_pbt,f1_pbt,precision_mt,recall_mt,f1_mt,precision_macro,recall_macro,f1_macro,mcc";

fn metric_cells(m: &Metrics) -> String {
    [
        m.accuracy,
        m.pbt.precision,
        m.pbt.recall,
        m.pbt.f1,
        m.mt.precision,
        m.mt.recall,
        m.mt.f1,
        m.macro_avg.precision,
        m.macro_avg.recall,
        m.macro_avg.f1,
        m.mcc,
    ]
    .iter()
    .map(|v| format!("{v:.6}"))
    .collect::<Vec<_>>()
    .join(",")
}

impl CvReport {
    /// One comma-separated row per fold followed by `mean` and `std` rows.
    pub fn fold_table(&self) -> String {
        let mut out = format!("{FOLD_COLUMNS}\n");
        for f in &self.folds {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                f.fold,
                f.test_ids.len(),
                f.report.best_epoch,
                metric_cells(&f.metrics)
            );
        }
        let _ = writeln!(out, "mean,,,{}", metric_cells(&self.summary.mean));
        let _ = writeln!(out, "std,,,{}", metric_cells(&self.summary.std));
        out
    }
}

/// Stratified `k`-fold cross-validation. Each fold trains on the other
/// folds minus an inner validation split and is scored on its own fold.
/// Folds run in parallel under `exec`; results are identical either way.
pub fn cross_validate(
    examples: &[Example],
    k: usize,
    model_config: &ModelConfig,
    config: &TrainConfig,
    exec: Execution,
) -> Result<CvReport, TrainError> {
    config.validate()?;
    let labels: Vec<Class> = examples.iter().map(|e| e.label).collect();
    let folds = stratified_kfold(&labels, k, config.seed)?;
    warn_single_class(examples, "corpus");
    let fold_numbers: Vec<usize> = (0..k).collect();
    let results = exec.try_map(&fold_numbers, |_, &f| -> Result<FoldResult, TrainError> {
        let rest: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        let test = pick(examples, &folds[f]);
        let fold_seed = config.seed.wrapping_add(f as u64 + 1);
        let (train, validation) = inner_split(pick(examples, &rest), config, fold_seed)?;
        let fold_config = TrainConfig {
            seed: fold_seed,
            ..*config
        };
        let (model, mut report) = train_model(&train, &validation, model_config, &fold_config, exec)?;
        let metrics = evaluate(&model, &test, exec)?;
        report.final_metrics = Some(metrics);
        Ok(FoldResult {
            fold: f + 1,
            train_ids: ids(&train),
            validation_ids: ids(&validation),
            test_ids: ids(&test),
            metrics,
            report,
        })
    })?;
    let metrics: Vec<Metrics> = results.iter().map(|r| r.metrics).collect();
    let summary = summarize(&metrics).expect("k >= 2 folds");
    Ok(CvReport {
        folds: results,
        summary,
    })
}

#[derive(Clone, Debug)]
pub struct HoldoutResult {
    pub model: Model,
    pub report: TrainReport,
    pub metrics: Metrics,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Single stratified split: `train_fraction` for training (with its own
/// inner validation split), the rest for testing.
pub fn evaluate_holdout(
    examples: &[Example],
    train_fraction: f64,
    model_config: &ModelConfig,
    config: &TrainConfig,
    exec: Execution,
) -> Result<HoldoutResult, TrainError> {
    config.validate()?;
    let labels: Vec<Class> = examples.iter().map(|e| e.label).collect();
    warn_single_class(examples, "corpus");
    let split = stratified_split_lenient(&labels, train_fraction, config.seed)?;
    let test = pick(examples, &split.test);
    if test.is_empty() {
        return Err(TrainError::Config("holdout split left no test patents".into()));
    }
    let (train, validation) = inner_split(pick(examples, &split.train), config, config.seed ^ 0x5eed)?;
    let (model, mut report) = train_model(&train, &validation, model_config, config, exec)?;
    let metrics = evaluate(&model, &test, exec)?;
    report.final_metrics = Some(metrics);
    Ok(HoldoutResult {
        model,
        report,
        metrics,
        train_ids: ids(&train),
        validation_ids: ids(&validation),
        test_ids: ids(&test),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Trains once per (learning rate, batch size) pair. Returns every point
/// and the position of the lowest best-validation loss (first on ties).
pub fn grid_search(
    train: &[Example],
    validation: &[Example],
    model_config: &ModelConfig,
    base: &TrainConfig,
    learning_rates: &[f64],
    batch_sizes: &[usize],
    exec: Execution,
) -> Result<(Vec<GridPoint>, usize), TrainError> {
    if learning_rates.is_empty() || batch_sizes.is_empty() {
        return Err(TrainError::Config("grid search needs at least one point".into()));
    }
    let mut points = Vec::new();
    for &learning_rate in learning_rates {
        for &batch_size in batch_sizes {
            let cfg = TrainConfig {
                learning_rate,
                batch_size,
                ..*base
            };
            let (_, report) = train_model(train, validation, model_config, &cfg, exec)?;
            points.push(GridPoint {
                learning_rate,
                batch_size,
                best_epoch: report.best_epoch,
                best_val_loss: report.best_val_loss,
            });
        }
    }
    let best = points
        .iter()
        .enumerate()
        .fold(0, |b, (i, p)| if p.best_val_loss < points[b].best_val_loss { i } else { b });
    Ok((points, best))
}
