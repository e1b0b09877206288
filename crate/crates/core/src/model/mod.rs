//! Claim-level self-attention classifier.
//!
//! A patent's claim matrix passes through a stack of single-head encoders.
//! The surviving active rows are averaged, projected through `tanh`, and
//! mapped to two logits `[t_PBT, t_MT]`. The last encoder's attention is kept
//! for claim-level interpretation.

mod batch;
mod checkpoint;
mod forward;
mod params;

use thiserror::Error;

pub use batch::{batch_loss, batch_loss_and_grads, example_seed, BatchExample};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHAN_MAGIC, CHAN_VERSION};
pub use forward::{
    encoder_forward, encoder_graph, model_graph, predict_class, AttentionRecord, EncoderVars,
    ForwardOutput, Mode, Model, ParamVars, Prediction, LN_EPS,
};
pub use params::{xavier_limit, EncoderParams, ModelConfig, ModelParams};

use crate::embed::EmbedError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("patent has no embeddable claims")]
    NoClaims,
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("input is {}x{} but the model expects {}x{}", found.0, found.1, expected.0, expected.1)]
    InputShape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("parameter block {name} is {}x{}, expected {}x{}", found.0, found.1, expected.0, expected.1)]
    BlockShape {
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("not a CHAN checkpoint")]
    NotCheckpoint,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated checkpoint: needed {needed} bytes at byte offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("checkpoint block {index} is named {found:?}, expected {expected:?}")]
    BlockName {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("{trailing} trailing bytes in checkpoint at byte offset {offset}")]
    TrailingBytes { offset: usize, trailing: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
