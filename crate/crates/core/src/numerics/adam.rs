//! Adam with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use super::{Matrix, NumericsError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment buffers, one pair per parameter block.
#[derive(Clone, Debug)]
pub struct AdamState {
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl AdamState {
    pub fn new<'m>(shapes: impl IntoIterator<Item = &'m Matrix>) -> Self {
        let first: Vec<Matrix> = shapes
            .into_iter()
            .map(|m| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Self {
            step: 0,
            second: first.clone(),
            first,
        }
    }

    /// Number of completed steps (`t` after the last update).
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Matrix] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Matrix] {
        &self.second
    }
}

/// Applies one Adam update in place and advances `state.step`.
pub fn adam_step(
    params: &mut [&mut Matrix],
    grads: &[&Matrix],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<(), NumericsError> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(NumericsError::InvalidArgument(format!(
            "adam: {} parameter blocks, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(NumericsError::shape("adam_step", p.shape(), g.shape()));
        }
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(NumericsError::NonFinite { op: "adam_step" });
    }

    state.step += 1;
    let t = state.step as i32;
    let correction1 = 1.0 - config.beta1.powi(t);
    let correction2 = 1.0 - config.beta2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        let p = p.as_mut_slice();
        let g = g.as_slice();
        let m = m.as_mut_slice();
        let v = v.as_mut_slice();
        for i in 0..p.len() {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            p[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::filled(1, 1, v)
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut w = scalar(1.25);
        let mut state = AdamState::new([&w]);
        let cfg = AdamConfig::with_learning_rate(0.1);
        adam_step(&mut [&mut w], &[&scalar(1.0)], &mut state, &cfg).unwrap();
        let after_first = w.get(0, 0);
        let m1 = state.first_moments()[0].get(0, 0);
        adam_step(&mut [&mut w], &[&scalar(0.0)], &mut state, &cfg).unwrap();
        // moments decay, parameter still moves by the decayed momentum
        assert!((state.first_moments()[0].get(0, 0) - 0.9 * m1).abs() < 1e-15);

        let mut fresh = scalar(2.0);
        let mut st = AdamState::new([&fresh]);
        adam_step(&mut [&mut fresh], &[&scalar(0.0)], &mut st, &cfg).unwrap();
        assert_eq!(fresh.get(0, 0), 2.0);
        assert!(after_first < 1.25);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = scalar(0.0);
        let mut state = AdamState::new([&w]);
        adam_step(
            &mut [&mut w],
            &[&scalar(1.0)],
            &mut state,
            &AdamConfig::with_learning_rate(0.1),
        )
        .unwrap();
        assert!((w.get(0, 0) + 0.1).abs() < 1e-7);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn converges_on_quadratic() {
        // Independent textbook recurrence on f(w) = (w - 3)², run alongside.
        let (mut ref_w, mut ref_m, mut ref_v) = (0.0f64, 0.0f64, 0.0f64);
        let mut w = scalar(0.0);
        let mut state = AdamState::new([&w]);
        let cfg = AdamConfig::with_learning_rate(0.1);
        for t in 1..=100 {
            let g = 2.0 * (w.get(0, 0) - 3.0);
            adam_step(&mut [&mut w], &[&scalar(g)], &mut state, &cfg).unwrap();

            let rg = 2.0 * (ref_w - 3.0);
            ref_m = 0.9 * ref_m + 0.1 * rg;
            ref_v = 0.999 * ref_v + 0.001 * rg * rg;
            let mh = ref_m / (1.0 - 0.9f64.powi(t));
            let vh = ref_v / (1.0 - 0.999f64.powi(t));
            ref_w -= 0.1 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((w.get(0, 0) - ref_w).abs() < 1e-12);
        assert!((w.get(0, 0) - 3.0).abs() < 0.05, "w = {}", w.get(0, 0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut w = Matrix::zeros(2, 2);
        let mut state = AdamState::new([&w]);
        let g = Matrix::zeros(2, 3);
        assert!(adam_step(&mut [&mut w], &[&g], &mut state, &AdamConfig::default()).is_err());
    }
}
