//! Central finite-difference validation of recorded gradients.

use serde::Serialize;

use super::{Matrix, NumericsError};

/// Denominator floor for relative errors, so entries whose true gradient is
/// numerically zero are judged on absolute error instead.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct BlockCheck {
    pub name: String,
    pub entries: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub worst_entry: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub tolerance: f64,
    pub blocks: Vec<BlockCheck>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.max_relative_error < self.tolerance)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BlockCheck> {
        self.blocks
            .iter()
            .filter(|b| b.max_relative_error >= self.tolerance)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares `analytic` gradients against `(f(θ+ε) − f(θ−ε)) / 2ε` for every
/// entry of every block. `params` is restored before returning.
///
/// The closure must be deterministic; it is evaluated twice at the
/// unperturbed point and a mismatch is reported as
/// [`NumericsError::NonDeterministic`].
pub fn grad_check<F>(
    names: &[String],
    params: &mut [Matrix],
    analytic: &[Matrix],
    mut loss: F,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport, NumericsError>
where
    F: FnMut(&[Matrix]) -> Result<f64, NumericsError>,
{
    if names.len() != params.len() || analytic.len() != params.len() {
        return Err(NumericsError::InvalidArgument(format!(
            "grad_check: {} names, {} blocks, {} gradients",
            names.len(),
            params.len(),
            analytic.len()
        )));
    }
    for (p, g) in params.iter().zip(analytic) {
        if p.shape() != g.shape() {
            return Err(NumericsError::shape("grad_check", p.shape(), g.shape()));
        }
    }
    let first = loss(params)?;
    let second = loss(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(NumericsError::NonDeterministic);
    }

    let mut blocks = Vec::with_capacity(params.len());
    for b in 0..params.len() {
        let mut check = BlockCheck {
            name: names[b].clone(),
            entries: params[b].len(),
            max_relative_error: 0.0,
            max_absolute_error: 0.0,
            worst_entry: 0,
        };
        for i in 0..params[b].len() {
            let original = params[b].as_slice()[i];
            params[b].as_mut_slice()[i] = original + epsilon;
            let plus = loss(params);
            params[b].as_mut_slice()[i] = original - epsilon;
            let minus = loss(params);
            params[b].as_mut_slice()[i] = original;
            let numeric = (plus? - minus?) / (2.0 * epsilon);
            let a = analytic[b].as_slice()[i];
            let rel = relative_error(a, numeric);
            if rel > check.max_relative_error {
                check.max_relative_error = rel;
                check.worst_entry = i;
            }
            check.max_absolute_error = check.max_absolute_error.max((a - numeric).abs());
        }
        blocks.push(check);
    }
    Ok(GradCheckReport {
        epsilon,
        tolerance,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_matches_to_machine_precision() {
        let x = [0.5, -1.25, 2.0];
        let mut params = vec![Matrix::from_vec(3, 1, vec![0.3, 0.1, -0.7]).unwrap()];
        let analytic = vec![Matrix::from_vec(3, 1, x.to_vec()).unwrap()];
        let report = grad_check(
            &["w".to_string()],
            &mut params,
            &analytic,
            |p| Ok(p[0].as_slice().iter().zip(&x).map(|(w, x)| w * x).sum()),
            1e-5,
            1e-8,
        )
        .unwrap();
        assert!(report.passed());
        assert!(report.max_relative_error() < 1e-9, "{report:?}");
        assert_eq!(params[0].as_slice(), &[0.3, 0.1, -0.7]);
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let mut params = vec![Matrix::filled(1, 1, 2.0)];
        let analytic = vec![Matrix::filled(1, 1, 1.0)];
        let report = grad_check(
            &["w".to_string()],
            &mut params,
            &analytic,
            |p| Ok(p[0].get(0, 0).powi(2)),
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures().count(), 1);
    }

    #[test]
    fn non_deterministic_closure_is_rejected() {
        let mut params = vec![Matrix::filled(1, 1, 2.0)];
        let analytic = vec![Matrix::filled(1, 1, 1.0)];
        let mut calls = 0.0;
        let err = grad_check(
            &["w".to_string()],
            &mut params,
            &analytic,
            |p| {
                calls += 1.0;
                Ok(p[0].get(0, 0) + calls)
            },
            1e-5,
            1e-4,
        )
        .unwrap_err();
        assert!(err.to_string().contains("non-deterministic closure"));
    }
}
