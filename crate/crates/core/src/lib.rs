//! Claim-level self-attention screening of patents.
//!
//! A patent is represented by the embeddings of its claims. A stack of
//! single-head self-attention encoders mixes the claim vectors, a tanh
//! pooling layer summarizes them, and a linear head scores the patent as a
//! potential breakthrough technology (PBT) or a marginal technology (MT).
//! The final encoder's attention matrix explains each prediction claim by
//! claim.
//!
//! Modules follow the pipeline:
//!
//! - [`corpus`]: corpus parsing, claim preprocessing, citation labeling, stratified splits
//! - [`dataset`]: labeled claim matrices from a corpus and an embedding source
//! - [`embed`]: claim matrices, the hashed embedder, the CEMB interchange format
//! - [`numerics`]: matrices, reverse-mode autodiff, Adam, gradient checking
//! - [`model`]: the claim encoder stack, pooling, prediction head, checkpoints
//! - [`train`]: mini-batch training, early stopping, cross-validation
//! - [`eval`]: confusion matrices and screening metrics
//! - [`interpret`]: claim scores, explanation reports, Welch's t-test
//! - [`synthetic`]: planted-token corpora for desk-scale experiments
//! - [`exec`]: data-parallel helpers with a sequential fallback

pub mod corpus;
pub mod dataset;
pub mod embed;
pub mod eval;
pub mod exec;
pub mod interpret;
pub mod model;
pub mod numerics;
pub mod synthetic;
pub mod train;

pub use corpus::Class;
pub use numerics::Matrix;
