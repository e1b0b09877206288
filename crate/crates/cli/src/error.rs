use std::path::PathBuf;

use claimscreen::corpus::CorpusError;
use claimscreen::embed::EmbedError;
use claimscreen::eval::EvalError;
use claimscreen::interpret::InterpretError;
use claimscreen::model::ModelError;
use claimscreen::train::TrainError;
use thiserror::Error;

/// Process exit codes. Usage errors (2) are reported by clap itself.
pub mod exit {
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const CONFIG: u8 = 4;
    pub const DATA: u8 = 5;
    pub const TRAINING: u8 = 6;
    pub const EXISTS: u8 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing input file {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("data: {0}")]
    Data(String),
    #[error("training: {0}")]
    Training(String),
    #[error("{} already exists; pass --force to overwrite", .0.display())]
    Exists(PathBuf),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::MissingInput(_) | CliError::Io { .. } => exit::IO,
            CliError::Config(_) | CliError::Shape(_) => exit::CONFIG,
            CliError::Data(_) => exit::DATA,
            CliError::Training(_) => exit::TRAINING,
            CliError::Exists(_) => exit::EXISTS,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidArgument(m) => CliError::Config(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::DimensionMismatch { .. } => CliError::Shape(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) => CliError::Config(e.to_string()),
            ModelError::InputShape { .. } | ModelError::BlockShape { .. } => CliError::Shape(e.to_string()),
            ModelError::Embed(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Config(e.to_string()),
            TrainError::Model(inner) => inner.into(),
            TrainError::Corpus(inner) => inner.into(),
            TrainError::Divergence { .. } | TrainError::Numerics(_) => CliError::Training(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<InterpretError> for CliError {
    fn from(e: InterpretError) -> Self {
        match e {
            InterpretError::Model(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}
