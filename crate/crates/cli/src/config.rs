//! Pipeline configuration file (TOML).
//!
//! Every section and key is optional. Relative paths are resolved against
//! the directory holding the config file, or the working directory when no
//! file is used.

use std::path::{Path, PathBuf};

use claimscreen::corpus::{ClaimFilter, Horizon, LabelMode, LabelPolicies};
use claimscreen::interpret::Normalization;
use claimscreen::model::ModelConfig;
use claimscreen::train::TrainConfig;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub labels: PathBuf,
    pub embeddings: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
    /// One stopword per line; the built-in English list when absent.
    pub stopwords: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: "corpus.jsonl".into(),
            labels: "labels.csv".into(),
            embeddings: "claims.cemb".into(),
            checkpoints: "checkpoints".into(),
            reports: "reports".into(),
            stopwords: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    #[default]
    Hashed,
    Cemb,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSection {
    pub provider: Provider,
    /// Seed of the hashed embedder.
    pub seed: u64,
    pub max_tokens: usize,
}

impl Default for EmbedSection {
    fn default() -> Self {
        Self {
            provider: Provider::Hashed,
            seed: 0,
            max_tokens: claimscreen::corpus::DEFAULT_MAX_TOKENS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Share of patents used for training by `train`.
    pub train_fraction: f64,
    /// Fold count for `cv`.
    pub k: usize,
    pub normalization: Normalization,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            k: 5,
            normalization: Normalization::Max,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub labels: LabelPolicies,
    pub claim_filter: ClaimFilter,
    pub horizon: Option<Horizon>,
    pub embed: EmbedSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if !path.exists() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.paths.resolve(base);
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for h in Horizon::ALL {
            match self.labels.get(h) {
                LabelMode::FixedThreshold(0) => {
                    return Err(CliError::Config(format!("{h} threshold must be positive")))
                }
                LabelMode::Quantile(q) if !(q > 0.0 && q < 1.0) => {
                    return Err(CliError::Config(format!("{h} quantile must lie in (0, 1), got {q}")))
                }
                _ => {}
            }
        }
        self.model.validate()?;
        self.train.validate()?;
        if !(self.eval.train_fraction > 0.0 && self.eval.train_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "eval.train_fraction must lie in (0, 1), got {}",
                self.eval.train_fraction
            )));
        }
        if self.eval.k < 2 {
            return Err(CliError::Config(format!("eval.k must be at least 2, got {}", self.eval.k)));
        }
        if self.embed.max_tokens == 0 {
            return Err(CliError::Config("embed.max_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.corpus);
        join(&mut self.labels);
        join(&mut self.embeddings);
        join(&mut self.checkpoints);
        join(&mut self.reports);
        if let Some(s) = &mut self.stopwords {
            join(s);
        }
    }

    pub fn checkpoint(&self, horizon: Horizon) -> PathBuf {
        self.checkpoints.join(format!("model-{horizon}.chan"))
    }

    pub fn report(&self, name: impl AsRef<Path>) -> PathBuf {
        self.reports.join(name)
    }
}
