use std::path::{Path, PathBuf};

use super::artifact::{json_bytes, write_file};
use super::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::synthetic::{shifted_fixture, ShiftSpec};

/// Write a synthetic corpus, RUN 1 / RUN 2 feature files and a pipeline
/// config into `dir`; returns the config path.
///
/// RUN 2 features come from the same clusters drawn with a different seed.
pub fn write_fixture(dir: &Path, spec: &ShiftSpec, n_trials: usize, k: usize, seed: u64) -> Result<PathBuf> {
    let (corpus, run1) = shifted_fixture(spec)?;
    let run2_spec = ShiftSpec {
        seed: spec.seed.wrapping_add(1),
        ..spec.clone()
    };
    let (_, run2) = shifted_fixture(&run2_spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    corpus.save_jsonl(&dir.join("corpus.jsonl"))?;
    run1.save(&dir.join("run1.embv1"))?;
    run2.save(&dir.join("run2.embv1"))?;

    let mut cfg = PipelineConfig::new("corpus.jsonl", "out");
    cfg.embeddings_run1_path = Some("run1.embv1".into());
    cfg.embeddings_run2_path = Some("run2.embv1".into());
    cfg.n_trials = n_trials;
    cfg.k = k;
    cfg.seed = seed;
    let path = dir.join("config.json");
    write_file(&path, &json_bytes(&cfg))?;
    Ok(path)
}
