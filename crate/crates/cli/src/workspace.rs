//! Config-driven loading of pipeline inputs and guarded writing of outputs.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use claimscreen::corpus::{
    parse_corpus, read_label_table, Class, Horizon, LabeledPatent, PatentRecord, Preprocessor,
    Stopwords,
};
use claimscreen::dataset::{attach_embeddings, label_examples, EmbeddedPatent, Example};
use claimscreen::embed::read_embeddings;
use claimscreen::exec::Execution;
use claimscreen::model::{load_checkpoint, Model, ModelConfig};

use crate::config::PipelineConfig;
use crate::error::CliError;

pub struct Workspace {
    pub config: PipelineConfig,
    pub force: bool,
    pub exec: Execution,
}

pub fn require(path: &Path) -> Result<&Path, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

/// Exclusive `<path>.lock` marker, removed on drop.
struct FileLock(PathBuf);

impl FileLock {
    fn acquire(target: &Path) -> Result<Self, CliError> {
        let mut name = target.as_os_str().to_owned();
        name.push(".lock");
        let lock = PathBuf::from(name);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(CliError::io(&lock))?;
        Ok(Self(lock))
    }
}

impl Drop for FileLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

impl Workspace {
    pub fn horizon(&self, flag: Option<Horizon>) -> Horizon {
        flag.or(self.config.horizon).unwrap_or(Horizon::Short)
    }

    /// Refuses to replace an existing file unless `--force` was given.
    pub fn check_output(&self, path: &Path) -> Result<(), CliError> {
        if path.exists() && !self.force {
            return Err(CliError::Exists(path.to_path_buf()));
        }
        Ok(())
    }

    /// Writes through a sibling temporary file and a rename, under a lock.
    pub fn write_output(&self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        self.check_output(path)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        }
        let _lock = FileLock::acquire(path)?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        std::fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
        std::fs::rename(&tmp, path).map_err(CliError::io(path))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    pub fn write_text(&self, path: &Path, text: &str) -> Result<(), CliError> {
        self.write_output(path, text.as_bytes())
    }

    pub fn records(&self, corpus: Option<&Path>) -> Result<Vec<PatentRecord>, CliError> {
        let path = corpus.unwrap_or(&self.config.paths.corpus);
        Ok(parse_corpus(require(path)?)?)
    }

    pub fn preprocessor(&self) -> Result<Preprocessor, CliError> {
        let stopwords = match &self.config.paths.stopwords {
            Some(p) => Stopwords::from_file(require(p)?)?,
            None => Stopwords::english(),
        };
        Ok(Preprocessor::new(stopwords, self.config.embed.max_tokens)?)
    }

    pub fn label_table(&self) -> Result<Vec<LabeledPatent>, CliError> {
        let path = require(&self.config.paths.labels)?;
        let file = std::fs::File::open(path).map_err(CliError::io(path))?;
        Ok(read_label_table(file)?)
    }

    pub fn labels(&self, horizon: Horizon) -> Result<HashMap<String, Class>, CliError> {
        Ok(self
            .label_table()?
            .into_iter()
            .map(|p| {
                let class = p.class(horizon);
                (p.patent_id, class)
            })
            .collect())
    }

    /// Corpus records paired with their stored claim vectors.
    pub fn embedded(&self, dim: usize, max_claims: usize) -> Result<Vec<EmbeddedPatent>, CliError> {
        let records = self.records(None)?;
        let cemb = read_embeddings(require(&self.config.paths.embeddings)?)?;
        if cemb.dim != dim {
            return Err(CliError::Shape(format!(
                "embeddings have d_e = {} but the model expects {dim}",
                cemb.dim
            )));
        }
        Ok(attach_embeddings(&records, self.config.claim_filter, &cemb, dim, max_claims)?)
    }

    pub fn examples(&self, horizon: Horizon, m: &ModelConfig) -> Result<Vec<Example>, CliError> {
        let patents = self.embedded(m.dim, m.max_claims)?;
        let labels = self.labels(horizon)?;
        let examples = label_examples(&patents, &labels);
        if examples.len() < patents.len() {
            log::warn!("{} embedded patents have no label", patents.len() - examples.len());
        }
        Ok(examples)
    }

    pub fn model(&self, checkpoint: Option<&Path>, horizon: Horizon) -> Result<Model, CliError> {
        let default = self.config.paths.checkpoint(horizon);
        let path = checkpoint.unwrap_or(&default);
        Ok(load_checkpoint(require(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws(force: bool) -> Workspace {
        Workspace {
            config: PipelineConfig::default(),
            force,
            exec: Execution::Sequential,
        }
    }

    #[test]
    fn overwrite_needs_force() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested/report.txt");
        ws(false).write_text(&out, "a").unwrap();
        assert!(matches!(ws(false).write_text(&out, "b"), Err(CliError::Exists(_))));
        assert_eq!(std::fs::read_to_string(&out).unwrap(), "a");
        ws(true).write_text(&out, "b").unwrap();
        assert_eq!(std::fs::read_to_string(&out).unwrap(), "b");
        assert!(!dir.path().join("nested/report.txt.lock").exists());
    }

    #[test]
    fn held_lock_blocks_writers() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("model.chan");
        let _held = FileLock::acquire(&out).unwrap();
        assert!(matches!(ws(true).write_output(&out, b"x"), Err(CliError::Io { .. })));
    }
}
