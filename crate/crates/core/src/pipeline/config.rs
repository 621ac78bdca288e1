use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::TranslatorEndpoint;
use crate::error::{Error, Result};
use crate::hpo::{SearchSpace, TpeConfig, DEFAULT_PATIENCE};
use crate::training::{LossConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunId {
    Run1,
    Run2,
    Run3,
    Run4,
}

impl RunId {
    pub const ALL: [RunId; 4] = [RunId::Run1, RunId::Run2, RunId::Run3, RunId::Run4];

    pub fn as_str(self) -> &'static str {
        match self {
            RunId::Run1 => "run1",
            RunId::Run2 => "run2",
            RunId::Run3 => "run3",
            RunId::Run4 => "run4",
        }
    }

    /// The scoring run a threshold run refines.
    pub fn parent(self) -> Option<RunId> {
        match self {
            RunId::Run3 => Some(RunId::Run1),
            RunId::Run4 => Some(RunId::Run2),
            _ => None,
        }
    }
}

impl fmt::Display for RunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RunId::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown run id {s:?}; expected run1..run4")))
    }
}

fn default_k() -> usize {
    5
}

fn default_trials() -> usize {
    50
}

fn default_patience() -> usize {
    DEFAULT_PATIENCE
}

fn default_hash_dim() -> usize {
    256
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a pipeline invocation needs, read from one JSON document.
///
/// Relative paths are resolved against the directory holding the config
/// file. Without `embeddings_run1_path` RUN 1 falls back to the hashed
/// n-gram encoder with `hash_dim` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_path: PathBuf,
    #[serde(default)]
    pub embeddings_run1_path: Option<PathBuf>,
    #[serde(default)]
    pub embeddings_run2_path: Option<PathBuf>,
    /// Extra embedding files compared by `analyze --baseline`.
    #[serde(default)]
    pub baseline_embeddings: Vec<PathBuf>,
    #[serde(default)]
    pub translator: TranslatorEndpoint,
    #[serde(default)]
    pub space: SearchSpace,
    #[serde(default)]
    pub tpe: TpeConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hash_dim")]
    pub hash_dim: usize,
    /// Share of source tweets held out as a stratified test split.
    #[serde(default)]
    pub holdout_fraction: Option<f64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl PipelineConfig {
    pub fn new(corpus_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            corpus_path: corpus_path.into(),
            embeddings_run1_path: None,
            embeddings_run2_path: None,
            baseline_embeddings: Vec::new(),
            translator: TranslatorEndpoint::default(),
            space: SearchSpace::default(),
            tpe: TpeConfig::default(),
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            k: default_k(),
            n_trials: default_trials(),
            patience: default_patience(),
            seed: 0,
            hash_dim: default_hash_dim(),
            holdout_fraction: None,
            output_dir: output_dir.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_path);
        fix(&mut self.output_dir);
        if let Some(p) = self.embeddings_run1_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.embeddings_run2_path.as_mut() {
            fix(p);
        }
        for p in &mut self.baseline_embeddings {
            fix(p);
        }
        if let Some(p) = self.translator.cache_dir.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.translator.validate()?;
        self.space.validate()?;
        self.tpe.validate()?;
        self.train.validate()?;
        self.loss.validate()?;
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be positive".into()));
        }
        if self.hash_dim < 2 {
            return Err(Error::Config("hash_dim must be at least 2".into()));
        }
        if let Some(f) = self.holdout_fraction {
            if !(f > 0.0 && f <= 0.5) {
                return Err(Error::Config(format!("holdout_fraction must lie in (0, 0.5], got {f}")));
            }
        }
        Ok(())
    }

    pub fn run_dir(&self, run: RunId) -> PathBuf {
        self.output_dir.join(run.as_str())
    }

    /// Training and search settings with every seed set to `self.seed`.
    pub(crate) fn seeded(&self) -> (TrainConfig, TpeConfig) {
        let train = TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        };
        let tpe = TpeConfig {
            seed: self.seed,
            ..self.tpe.clone()
        };
        (train, tpe)
    }

    pub fn embeddings_for(&self, run: RunId) -> Result<Option<&Path>> {
        match run {
            RunId::Run1 => Ok(self.embeddings_run1_path.as_deref()),
            RunId::Run2 => self
                .embeddings_run2_path
                .as_deref()
                .map(Some)
                .ok_or_else(|| Error::Config("run2 needs embeddings_run2_path".into())),
            _ => Err(Error::Config(format!("{run} does not read embeddings"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"corpus_path": "data/corpus.jsonl", "seed": 9}"#).unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.n_trials, 50);
        assert_eq!(cfg.corpus_path, dir.path().join("data/corpus.jsonl"));
        assert_eq!(cfg.output_dir, dir.path().join("out"));
        assert_eq!(cfg.seeded().0.seed, 9);
    }

    #[test]
    fn bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"corpus_path": "c", "k": 1}"#).unwrap();
        assert!(matches!(PipelineConfig::load(&path), Err(Error::Config(_))));
        fs::write(&path, r#"{"corpus_path": "c", "colour": 1}"#).unwrap();
        assert!(matches!(PipelineConfig::load(&path), Err(Error::Config(_))));
        assert!(matches!(
            PipelineConfig::load(&dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn run_ids() {
        assert_eq!("run3".parse::<RunId>().unwrap().parent(), Some(RunId::Run1));
        assert_eq!(RunId::Run4.parent(), Some(RunId::Run2));
        assert!("run5".parse::<RunId>().is_err());
    }
}
