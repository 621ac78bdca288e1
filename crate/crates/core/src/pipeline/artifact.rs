use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunId;
use crate::calibrate::{CurvePoint, ScoredPrediction, ThresholdMap};
use crate::corpus::Lang;
use crate::error::{Error, Result};
use crate::evaluation::{IntervalEstimate, MetricsReport};
use crate::hpo::{Params, Study, TrialRecord};

/// Seed and input digest carried by every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub input_sha256: String,
}

impl Provenance {
    pub fn comment(&self) -> String {
        format!("# seed={} input_sha256={}\n", self.seed, self.input_sha256)
    }
}

/// Incremental sha256 over length-prefixed parts.
#[derive(Default)]
pub struct InputHasher(Sha256);

impl InputHasher {
    pub fn part(&mut self, bytes: &[u8]) -> &mut Self {
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
        self
    }

    pub fn file(&mut self, path: &Path) -> Result<&mut Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(self.part(&bytes))
    }

    pub fn finish(&mut self) -> String {
        hex::encode(std::mem::take(&mut self.0).finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

/// One scored row. Validation rows carry out-of-fold confidences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub lang: Lang,
    pub split: Split,
    pub conf: f64,
    pub label: u8,
}

impl ScoreRow {
    pub fn scored(&self) -> ScoredPrediction {
        ScoredPrediction {
            id: self.id.clone(),
            lang: self.lang,
            conf: self.conf,
            label: Some(self.label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub lang: Lang,
    pub conf: f64,
    pub pred_default: u8,
    pub pred_thresholded: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub macro_f1: IntervalEstimate,
    pub fold_macro_f1: Vec<f64>,
    pub best_epochs: Vec<usize>,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: RunId,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<RunId>,
    pub evaluated_split: Split,
    /// Metrics of `pred_thresholded` (equal to the 0.5 rule for scoring runs).
    pub metrics: MetricsReport,
    pub metrics_default: MetricsReport,
    pub flips: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_params: Option<Params>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_source: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub summary: RunSummary,
    pub scores: Vec<ScoreRow>,
    pub predictions: Vec<PredictionRow>,
    pub study: Option<Study>,
    pub curve: Vec<CurvePoint>,
}

impl RunArtifact {
    pub fn run_id(&self) -> RunId {
        self.summary.run_id
    }

    pub fn provenance(&self) -> &Provenance {
        &self.summary.provenance
    }
}

pub const SCORES: &str = "scores.tsv";
pub const PREDICTIONS: &str = "predictions.tsv";
pub const METRICS: &str = "metrics.json";
pub const CV_SUMMARY: &str = "cv_summary.csv";
pub const HPO_JSONL: &str = "hpo_history.jsonl";
pub const HPO_CSV: &str = "hpo_history.csv";
pub const THRESHOLDS: &str = "thresholds.json";
pub const CURVE: &str = "threshold_curve.csv";

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: format!("{}: {e}", path.display()),
    }
}

/// Provenance comment line, then a delimited table with a header row.
pub(crate) fn table_bytes<T: Serialize>(prov: &Provenance, delimiter: u8, rows: &[T]) -> Result<Vec<u8>> {
    let mut out = prov.comment().into_bytes();
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(&mut out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    drop(w);
    Ok(out)
}

pub(crate) fn read_table<T: for<'de> Deserialize<'de>>(path: &Path, delimiter: u8) -> Result<Vec<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .from_reader(bytes.as_slice())
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

pub(crate) fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

#[derive(Serialize)]
struct WithProvenance<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub(crate) fn json_with_provenance<T: Serialize>(prov: &Provenance, body: &T) -> Vec<u8> {
    json_bytes(&WithProvenance { provenance: prov, body })
}

/// Write every file of a run under `dir` and return their paths.
pub fn write_artifact(dir: &Path, art: &RunArtifact, cv_csv: Option<&str>) -> Result<Vec<PathBuf>> {
    let prov = art.provenance();
    let mut files: Vec<(PathBuf, Vec<u8>)> = vec![
        (dir.join(SCORES), table_bytes(prov, b'\t', &art.scores)?),
        (dir.join(PREDICTIONS), table_bytes(prov, b'\t', &art.predictions)?),
        (dir.join(METRICS), json_bytes(&art.summary)),
    ];
    if let Some(csv) = cv_csv {
        files.push((dir.join(CV_SUMMARY), format!("{}{csv}", prov.comment()).into_bytes()));
    }
    if let Some(study) = &art.study {
        // JSONL stays one record per line; provenance sits in metrics.json
        files.push((dir.join(HPO_JSONL), study.to_jsonl().into_bytes()));
        files.push((dir.join(HPO_CSV), format!("{}{}", prov.comment(), study.to_csv()).into_bytes()));
    }
    if let Some(tmap) = &art.summary.thresholds {
        files.push((dir.join(THRESHOLDS), json_with_provenance(prov, &tmap.report_json())));
        files.push((dir.join(CURVE), table_bytes(prov, b',', &art.curve)?));
    }
    for (path, bytes) in &files {
        write_file(path, bytes)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Rebuild a run from its directory; a missing run is a dependency error.
pub fn read_artifact(dir: &Path, run: RunId) -> Result<RunArtifact> {
    let metrics = dir.join(METRICS);
    if !metrics.exists() || !dir.join(SCORES).exists() {
        return Err(Error::Dependency(format!(
            "{run} artifacts not found under {}; execute `run --id {run}` first",
            dir.display()
        )));
    }
    let text = fs::read_to_string(&metrics).map_err(|e| Error::io(&metrics, e))?;
    let summary: RunSummary = serde_json::from_str(&text)?;
    let study = if dir.join(HPO_JSONL).exists() {
        let path = dir.join(HPO_JSONL);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let trials = text
            .lines()
            .map(serde_json::from_str::<TrialRecord>)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let best_trial = best_index(&trials)
            .ok_or_else(|| Error::Format(format!("{} has no complete trial", path.display())))?;
        Some(Study { trials, best_trial })
    } else {
        None
    };
    let curve = if dir.join(CURVE).exists() {
        read_table(&dir.join(CURVE), b',')?
    } else {
        Vec::new()
    };
    Ok(RunArtifact {
        summary,
        scores: read_table(&dir.join(SCORES), b'\t')?,
        predictions: read_table(&dir.join(PREDICTIONS), b'\t')?,
        study,
        curve,
    })
}

fn best_index(trials: &[TrialRecord]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in trials.iter().enumerate() {
        if let (crate::hpo::TrialState::Complete, Some(v)) = (t.state, t.final_value) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}
