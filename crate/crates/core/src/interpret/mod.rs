//! Claim importance from last-encoder attention, explanation reports, and
//! the independent-vs-dependent Welch t-test.

mod report;
mod welch;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{explain, ExplainReport, ExplainRow, EXCERPT_CHARS};
pub use welch::{render_ttest_table, welch_ttest, WelchResult, TTEST_ROWS};

use crate::corpus::ClaimType;
use crate::model::{AttentionRecord, ModelError};

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("patent has no active claims to score")]
    NoActiveClaims,
    #[error("all claim scores are zero; cannot normalize")]
    AllZero,
    #[error("group {group} has {n} scores; at least 2 are required")]
    TooFewScores { group: usize, n: usize },
    #[error("both groups have zero variance")]
    ZeroVariance,
    #[error("scores must be finite")]
    NonFinite,
    #[error("{claims} claim records for {active} active attention rows")]
    ClaimCount { claims: usize, active: usize },
    #[error("explain report line {line}: {message}")]
    Report { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How raw scores are rescaled within one patent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Divide by the patent maximum; the top claim scores exactly 1.
    #[default]
    Max,
    /// Divide by the patent mean.
    Mean,
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Self::Max),
            "mean" => Ok(Self::Mean),
            other => Err(format!("unknown normalization {other:?} (expected max or mean)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimScore {
    pub patent_id: String,
    /// Claim number as printed in the patent.
    pub claim_index: u32,
    pub claim_type: ClaimType,
    pub raw: f64,
    pub normalized: f64,
}

/// Attention received by each active claim: column sums of the last
/// attention matrix over active rows. Padded claims are omitted.
pub fn claim_scores(att: &AttentionRecord) -> Vec<f64> {
    att.claim_scores[..att.active].to_vec()
}

pub fn normalize_scores(raw: &[f64], mode: Normalization) -> Result<Vec<f64>, InterpretError> {
    if raw.is_empty() {
        return Err(InterpretError::NoActiveClaims);
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(InterpretError::NonFinite);
    }
    let denom = match mode {
        Normalization::Max => raw.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Normalization::Mean => raw.iter().sum::<f64>() / raw.len() as f64,
    };
    if denom <= 0.0 {
        return Err(InterpretError::AllZero);
    }
    Ok(raw.iter().map(|v| v / denom).collect())
}

/// Position of the largest score; ties go to the lowest position.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if v <= b => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Position of the smallest score; ties go to the lowest position.
pub fn argmin(scores: &[f64]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if v >= b => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Normalized scores pooled by claim type: (independent, dependent).
pub fn scores_by_type(scores: &[ClaimScore]) -> (Vec<f64>, Vec<f64>) {
    let mut independent = Vec::new();
    let mut dependent = Vec::new();
    for s in scores {
        if s.claim_type.is_independent() {
            independent.push(s.normalized);
        } else {
            dependent.push(s.normalized);
        }
    }
    (independent, dependent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{masked_softmax, Matrix};
    use proptest::prelude::*;

    #[test]
    fn uniform_attention_scores_one_each() {
        let k = 4;
        let mut m = Matrix::zeros(6, 6);
        for a in 0..k {
            for j in 0..k {
                m.set(a, j, 1.0 / k as f64);
            }
        }
        let s = claim_scores(&AttentionRecord::from_matrix(m, k));
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn hand_column_sum() {
        let m = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(claim_scores(&AttentionRecord::from_matrix(m, 2)), vec![2.0, 0.0]);
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(
            normalize_scores(&[2.0, 0.5, 0.5], Normalization::Max).unwrap(),
            vec![1.0, 0.25, 0.25]
        );
        assert_eq!(normalize_scores(&[1.0], Normalization::Max).unwrap(), vec![1.0]);
        assert_eq!(
            normalize_scores(&[0.7, 0.7, 0.7], Normalization::Max).unwrap(),
            vec![1.0; 3]
        );
        assert_eq!(
            normalize_scores(&[2.0, 0.5, 0.5], Normalization::Mean).unwrap(),
            vec![2.0, 0.5, 0.5]
        );
        assert!(matches!(
            normalize_scores(&[0.0, 0.0], Normalization::Max),
            Err(InterpretError::AllZero)
        ));
        assert!(matches!(
            normalize_scores(&[], Normalization::Max),
            Err(InterpretError::NoActiveClaims)
        ));
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmin(&[2.0, 1.0, 3.0, 1.0]), Some(1));
        assert_eq!(argmax(&[5.0; 3]), Some(0));
        assert_eq!(argmin(&[5.0; 3]), Some(0));
        assert_eq!(argmax(&[]), None);
    }

    proptest! {
        #[test]
        fn scores_sum_to_active_count(
            m in 1usize..8,
            k_raw in 1usize..8,
            seed in proptest::collection::vec(-5.0f64..5.0, 64)
        ) {
            let k = k_raw.min(m);
            let mut x = Matrix::zeros(m, m);
            for (i, v) in x.as_mut_slice().iter_mut().enumerate() {
                *v = seed[i % seed.len()] * (1.0 + i as f64 * 0.01);
            }
            let att = masked_softmax(&x, k);
            let rec = AttentionRecord::from_matrix(att.clone(), k);
            let s = claim_scores(&rec);
            // independent column-sum tally
            for (j, &v) in s.iter().enumerate() {
                let mut col = 0.0;
                for a in 0..k {
                    col += att.get(a, j);
                }
                prop_assert!((v - col).abs() < 1e-15);
                prop_assert!(v >= 0.0);
            }
            prop_assert!((s.iter().sum::<f64>() - k as f64).abs() < 1e-9);
            let n = normalize_scores(&s, Normalization::Max).unwrap();
            prop_assert!(n.iter().all(|&v| v > 0.0 && v <= 1.0));
            prop_assert_eq!(n[argmax(&s).unwrap()], 1.0);
        }
    }
}
