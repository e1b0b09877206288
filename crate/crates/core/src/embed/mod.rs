//! Claim matrices and embedding providers.
//!
//! A patent with `n` claims becomes an `m × d_e` matrix whose row `i` is the
//! mean token embedding of claim `i`. Claims beyond `m` are dropped (the
//! first `m` are kept in order) and missing rows are zero padding.

mod cemb;
mod hashed;

use thiserror::Error;

pub use cemb::{read_embeddings, write_embeddings, CembEntry, CembFile, CEMB_MAGIC, CEMB_VERSION};
pub use hashed::HashedEmbedder;

use crate::corpus::TokenizedClaim;
use crate::numerics::Matrix;

/// Default `d_e` for exported BERT-family embeddings.
pub const PLM_DIM: usize = 768;

/// Maps a claim's tokens to one `dim()`-vector.
///
/// Implementations must be deterministic and map an empty token list to the
/// zero vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed_claim(&self, tokens: &[String]) -> Vec<f64>;
}

/// Zero-padded claim vectors plus the number of real (active) claims.
#[derive(Clone, Debug, PartialEq)]
pub struct ClaimMatrix {
    rows: Matrix,
    active: usize,
}

impl ClaimMatrix {
    /// Builds from per-claim vectors, keeping the first `max_claims`.
    pub fn from_vectors<V: AsRef<[f64]>>(
        vectors: &[V],
        max_claims: usize,
        dim: usize,
    ) -> Result<Self, EmbedError> {
        if max_claims == 0 || dim == 0 {
            return Err(EmbedError::InvalidArgument(format!(
                "claim matrix needs m >= 1 and d_e >= 1, got m={max_claims}, d_e={dim}"
            )));
        }
        let active = vectors.len().min(max_claims);
        let mut rows = Matrix::zeros(max_claims, dim);
        for (i, v) in vectors.iter().take(active).enumerate() {
            let v = v.as_ref();
            if v.len() != dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::NonFinite);
            }
            rows.row_mut(i).copy_from_slice(v);
        }
        Ok(Self { rows, active })
    }

    /// Wraps an existing matrix; rows at or beyond `active` must be zero.
    pub fn from_matrix(rows: Matrix, active: usize) -> Result<Self, EmbedError> {
        if active > rows.rows() || rows.cols() == 0 || rows.rows() == 0 {
            return Err(EmbedError::InvalidArgument(format!(
                "{active} active claims in a {}x{} matrix",
                rows.rows(),
                rows.cols()
            )));
        }
        if !rows.is_finite() {
            return Err(EmbedError::NonFinite);
        }
        if (active..rows.rows()).any(|r| rows.row(r).iter().any(|&v| v != 0.0)) {
            return Err(EmbedError::InvalidArgument("padding rows must be zero".into()));
        }
        Ok(Self { rows, active })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }

    /// Number of non-padded claims `k`.
    pub fn active(&self) -> usize {
        self.active
    }

    /// Maximum number of claims `m`.
    pub fn max_claims(&self) -> usize {
        self.rows.rows()
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    /// Reorders the active rows: new row `i` is old row `perm[i]`.
    pub fn permute_active(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.active, "permutation must cover active rows");
        let mut rows = self.rows.clone();
        for (i, &p) in perm.iter().enumerate() {
            rows.row_mut(i).copy_from_slice(self.rows.row(p));
        }
        Self {
            rows,
            active: self.active,
        }
    }

    /// Same claims with `max_claims` slots (must not drop active rows).
    pub fn with_max_claims(&self, max_claims: usize) -> Result<Self, EmbedError> {
        let vectors: Vec<&[f64]> = (0..self.active).map(|r| self.rows.row(r)).collect();
        if max_claims < self.active {
            return Err(EmbedError::InvalidArgument(format!(
                "cannot fit {} active claims into {max_claims} slots",
                self.active
            )));
        }
        Self::from_vectors(&vectors, max_claims, self.dim())
    }
}

pub fn build_claim_matrix(
    claims: &[TokenizedClaim],
    provider: &dyn EmbeddingProvider,
    max_claims: usize,
) -> Result<ClaimMatrix, EmbedError> {
    let vectors: Vec<Vec<f64>> = claims
        .iter()
        .take(max_claims)
        .map(|c| provider.embed_claim(&c.tokens))
        .collect();
    ClaimMatrix::from_vectors(&vectors, max_claims, provider.dim())
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("not a CEMB file")]
    NotCemb,
    #[error("unsupported CEMB version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated CEMB file: needed {needed} bytes at byte offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{trailing} trailing bytes after the last record at byte offset {offset}")]
    TrailingBytes { offset: usize, trailing: usize },
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no embeddings for patent {0:?}")]
    MissingPatent(String),
    #[error("embeddings must be finite")]
    NonFinite,
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
