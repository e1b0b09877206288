//! Mini-batch Adam training with early stopping, grid search and
//! stratified cross-validation.

mod cv;
mod report;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cv::{
    cross_validate, evaluate_holdout, grid_search, CvReport, FoldResult, GridPoint, HoldoutResult,
    GRID_BATCH_SIZES, GRID_LEARNING_RATES,
};
pub use report::{EpochRecord, StopReason, TrainReport};

use crate::corpus::{Class, CorpusError};
use crate::dataset::Example;
use crate::eval::{compute_metrics, confusion, EvalError, Metrics};
use crate::exec::Execution;
use crate::model::{
    batch_loss, batch_loss_and_grads, BatchExample, Model, ModelConfig, ModelError, Prediction,
};
use crate::numerics::{adam_step, AdamConfig, AdamState, NumericsError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Divergence { epoch: usize, batch: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Clamped to the training-set size.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Share of the training data held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-5,
            batch_size: 512,
            max_epochs: 100,
            patience: 5,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        Ok(())
    }
}

/// Tracks the best validation loss and decides when to stop.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observation {
    Improved,
    Stale,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records `loss` for `epoch`; only a strict decrease counts as progress.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> Observation {
        match self.best {
            Some((_, best)) if loss >= best => {
                self.stale += 1;
                if self.stale >= self.patience {
                    Observation::Stop
                } else {
                    Observation::Stale
                }
            }
            _ => {
                self.best = Some((epoch, loss));
                self.stale = 0;
                Observation::Improved
            }
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

fn class_counts(set: &[Example]) -> [usize; 2] {
    let mut c = [0; 2];
    set.iter().for_each(|e| c[e.label.index()] += 1);
    c
}

fn as_batch(set: &[Example]) -> Vec<BatchExample<'_>> {
    set.iter().map(|e| (&e.claims, e.label)).collect()
}

fn divergence(e: ModelError, epoch: usize, batch: usize) -> TrainError {
    match e {
        ModelError::Numerics(NumericsError::NonFinite { .. }) => TrainError::Divergence { epoch, batch },
        other => other.into(),
    }
}

/// Trains a fresh model and returns it with the parameters of its best
/// validation epoch.
///
/// With an empty validation set the training loss in eval mode drives early
/// stopping instead (a warning is logged).
pub fn train_model(
    train: &[Example],
    validation: &[Example],
    model_config: &ModelConfig,
    config: &TrainConfig,
    exec: Execution,
) -> Result<(Model, TrainReport), TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    for (name, set) in [("training", train), ("validation", validation)] {
        let [pbt, mt] = class_counts(set);
        if !set.is_empty() && (pbt == 0 || mt == 0) {
            log::warn!("{name} set has a single class ({pbt} PBT, {mt} MT)");
        }
    }
    if validation.is_empty() {
        log::warn!("validation set is empty; early stopping uses the training loss");
    }
    let monitor = if validation.is_empty() { train } else { validation };

    let mut model = Model::new(*model_config)?;
    let adam = AdamConfig::with_learning_rate(config.learning_rate);
    let mut state = AdamState::new(model.params.blocks());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batch_size = config.batch_size.min(train.len());
    let monitor_batch = as_batch(monitor);

    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = model.params.clone();
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<BatchExample> = chunk.iter().map(|&i| (&train[i].claims, train[i].label)).collect();
            let dropout_seed: u64 = rng.gen();
            let (loss, grads) = batch_loss_and_grads(&model, &batch, Some(dropout_seed), exec)
                .map_err(|e| divergence(e, epoch, b + 1))?;
            if !loss.is_finite() {
                return Err(TrainError::Divergence { epoch, batch: b + 1 });
            }
            weighted += loss * chunk.len() as f64;
            let grads = grads.blocks();
            adam_step(&mut model.params.blocks_mut(), &grads, &mut state, &adam)
                .map_err(|e| divergence(e.into(), epoch, b + 1))?;
        }
        let train_loss = weighted / train.len() as f64;
        let val_loss = batch_loss(&model, &monitor_batch, None, exec)
            .map_err(|e| divergence(e, epoch, 0))?;
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        match stopper.observe(epoch, val_loss) {
            Observation::Improved => best_params = model.params.clone(),
            Observation::Stale => {}
            Observation::Stop => {
                stop_reason = StopReason::Patience;
                break;
            }
        }
    }

    let (best_epoch, best_val_loss) = stopper.best().expect("at least one epoch ran");
    model.params = best_params;
    let report = TrainReport {
        epochs,
        best_epoch,
        best_val_loss,
        stop_reason,
        final_metrics: None,
    };
    Ok((model, report))
}

pub fn predict_all(
    model: &Model,
    examples: &[Example],
    exec: Execution,
) -> Result<Vec<Prediction>, TrainError> {
    let out = exec.try_map(examples, |_, e| model.predict(&e.claims).map(|(p, _)| p))?;
    Ok(out)
}

pub fn evaluate(model: &Model, examples: &[Example], exec: Execution) -> Result<Metrics, TrainError> {
    let predicted: Vec<Class> = predict_all(model, examples, exec)?
        .into_iter()
        .map(|p| p.class)
        .collect();
    let truth: Vec<Class> = examples.iter().map(|e| e.label).collect();
    Ok(compute_metrics(&confusion(&predicted, &truth)?)?)
}
