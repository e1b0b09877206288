//! Dense matrix math, reverse-mode differentiation, Adam, and a
//! finite-difference gradient checker.

mod adam;
mod gradcheck;
mod graph;
mod matrix;
pub mod special;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, relative_error, BlockCheck, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use graph::{masked_softmax, Graph, Var};
pub use matrix::Matrix;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("{op}: shape mismatch {}x{} vs {}x{}", .left.0, .left.1, .right.0, .right.1)]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{rows}x{cols} matrix cannot hold {len} values")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward needs a 1x1 output, got {}x{}", .0.0, .0.1)]
    NotScalar((usize, usize)),
    #[error("non-deterministic closure: repeated evaluation at the same point differs")]
    NonDeterministic,
    #[error("{0}")]
    InvalidArgument(String),
}

impl NumericsError {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Self::Shape { op, left, right }
    }
}
