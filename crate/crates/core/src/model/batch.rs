use super::{Mode, Model, ModelError, ModelParams};
use crate::corpus::Class;
use crate::embed::ClaimMatrix;
use crate::exec::Execution;

pub type BatchExample<'a> = (&'a ClaimMatrix, Class);

/// Dropout seed for example `index` of a batch drawn with `batch_seed`.
pub fn example_seed(batch_seed: u64, index: usize) -> u64 {
    batch_seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn mode_for(train: Option<u64>, index: usize) -> Mode {
    match train {
        None => Mode::Eval,
        Some(seed) => Mode::Train {
            dropout_seed: example_seed(seed, index),
        },
    }
}

/// Mean cross-entropy over the batch and its gradient.
///
/// Examples run independently (in parallel when `exec` allows it) and are
/// reduced in input order, so the result does not depend on `exec`.
/// `train = Some(seed)` enables dropout.
pub fn batch_loss_and_grads(
    model: &Model,
    batch: &[BatchExample<'_>],
    train: Option<u64>,
    exec: Execution,
) -> Result<(f64, ModelParams), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Config("empty batch".into()));
    }
    let parts = exec.try_map(batch, |i, &(claims, label)| {
        model.loss_and_grads(claims, label, mode_for(train, i))
    })?;
    let n = batch.len() as f64;
    let mut total = 0.0;
    let mut grads = model.params.zeros_like();
    for (loss, g) in &parts {
        total += loss;
        grads.add_assign(g);
    }
    grads.scale_in_place(1.0 / n);
    Ok((total / n, grads))
}

pub fn batch_loss(
    model: &Model,
    batch: &[BatchExample<'_>],
    train: Option<u64>,
    exec: Execution,
) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Config("empty batch".into()));
    }
    let losses = exec.try_map(batch, |i, &(claims, label)| {
        model.loss(claims, label, mode_for(train, i))
    })?;
    Ok(losses.iter().sum::<f64>() / batch.len() as f64)
}
