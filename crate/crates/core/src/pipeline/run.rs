use std::path::PathBuf;

use serde::Serialize;

use super::artifact::{
    write_artifact, read_artifact, CvSummary, InputHasher, PredictionRow, Provenance, RunArtifact, RunSummary,
    ScoreRow, Split,
};
use super::config::{PipelineConfig, RunId};
use crate::augment::{augment_corpus, Translator};
use crate::calibrate::{apply_thresholds, sweep_thresholds, threshold_curve, ScoredPrediction, DEFAULT_THRESHOLD};
use crate::corpus::{load_corpus, Corpus, Lang};
use crate::error::{Error, Result};
use crate::evaluation::{cross_validate, cross_validate_with, cv_summary_csv, evaluate, stratified_folds, CvResult};
use crate::features::{hash_encode, load_embeddings, EmbeddingMatrix};
use crate::hpo::{apply_params, optimize, Params, Study};
use crate::rng;
use crate::training::predict_confidences;

/// Augmented corpus and aligned features for a scoring run.
pub struct Prepared {
    pub corpus: Corpus,
    pub augmented: Corpus,
    pub embeddings: EmbeddingMatrix,
    pub provenance: Provenance,
    dev: Vec<usize>,
    test: Vec<usize>,
}

#[derive(Serialize)]
struct SemanticConfig<'a> {
    run: RunId,
    translator_kind: &'a crate::augment::EndpointKind,
    translator_model: &'a str,
    space: &'a crate::hpo::SearchSpace,
    tpe: &'a crate::hpo::TpeConfig,
    train: &'a crate::training::TrainConfig,
    loss: &'a crate::training::LossConfig,
    k: usize,
    n_trials: usize,
    patience: usize,
    seed: u64,
    hash_dim: usize,
    holdout_fraction: Option<f64>,
}

fn semantic_bytes(cfg: &PipelineConfig, run: RunId) -> Vec<u8> {
    serde_json::to_vec(&SemanticConfig {
        run,
        translator_kind: &cfg.translator.kind,
        translator_model: &cfg.translator.model_name,
        space: &cfg.space,
        tpe: &cfg.tpe,
        train: &cfg.train,
        loss: &cfg.loss,
        k: cfg.k,
        n_trials: cfg.n_trials,
        patience: cfg.patience,
        seed: cfg.seed,
        hash_dim: cfg.hash_dim,
        holdout_fraction: cfg.holdout_fraction,
    })
    .expect("config serializes")
}

/// Back-translate the corpus and attach its features.
pub fn prepare(cfg: &PipelineConfig, run: RunId) -> Result<Prepared> {
    let corpus = load_corpus(&cfg.corpus_path)?;
    let translator = Translator::new(cfg.translator.clone())?;
    let augmented = augment_corpus(&corpus, &translator)?;

    let mut hasher = InputHasher::default();
    hasher.file(&cfg.corpus_path)?.part(&semantic_bytes(cfg, run));
    let embeddings = match cfg.embeddings_for(run)? {
        Some(path) => {
            hasher.file(path)?;
            load_embeddings(path, augmented.len())?
        }
        None => {
            hasher.part(b"hashed-ngram");
            hash_encode(&augmented, cfg.hash_dim, cfg.seed)?
        }
    };

    let (dev, test) = match cfg.holdout_fraction {
        None => ((0..augmented.len()).collect(), Vec::new()),
        Some(f) => {
            let parts = (1.0 / f).round().max(2.0) as usize;
            let split = stratified_folds(&augmented, parts, rng::derive_seed(cfg.seed, "holdout", 0))?;
            (split.train_indices(0), split.val_indices(0).to_vec())
        }
    };
    Ok(Prepared {
        corpus,
        augmented,
        embeddings,
        provenance: Provenance {
            seed: cfg.seed,
            input_sha256: hasher.finish(),
        },
        dev,
        test,
    })
}

impl Prepared {
    fn dev_set(&self) -> Result<(Corpus, EmbeddingMatrix)> {
        if self.test.is_empty() {
            return Ok((self.augmented.clone(), self.embeddings.clone()));
        }
        let rows = self.dev.iter().map(|&i| self.augmented.examples()[i].clone()).collect();
        Ok((Corpus::new(rows)?, self.embeddings.select(&self.dev)))
    }
}

/// TPE study over cross-validated macro-F1 on the development rows.
pub fn run_study(cfg: &PipelineConfig, prepared: &Prepared) -> Result<Study> {
    let (dev, dev_emb) = prepared.dev_set()?;
    let (train, tpe) = cfg.seeded();
    optimize(
        |params, reporter| {
            let tc = apply_params(&train, params)?;
            let mut hook = |epoch: usize, value: f64| reporter.report(epoch, value);
            let cv = cross_validate_with(&dev, &dev_emb, &tc, &cfg.loss, cfg.k, cfg.seed, Some(&mut hook))?;
            Ok(cv.macro_f1.mean)
        },
        &cfg.space,
        &tpe,
        cfg.n_trials,
        cfg.patience,
    )
}

fn scoring_run(cfg: &PipelineConfig, run: RunId) -> Result<(RunArtifact, String)> {
    let prepared = prepare(cfg, run)?;
    let study = run_study(cfg, &prepared)?;
    let best: Params = study.best().params.clone();
    let (train, _) = cfg.seeded();
    let tc = apply_params(&train, &best)?;
    let (dev, dev_emb) = prepared.dev_set()?;
    let cv = cross_validate(&dev, &dev_emb, &tc, &cfg.loss, cfg.k, cfg.seed)?;

    let mut scores = Vec::with_capacity(prepared.augmented.len());
    for (j, &i) in prepared.dev.iter().enumerate() {
        scores.push(score_row(&prepared.augmented, i, Split::Validation, cv.oof_confidences[j]));
    }
    if !prepared.test.is_empty() {
        let test_conf = ensemble_confidences(&cv, &prepared.embeddings.select(&prepared.test))?;
        for (&i, c) in prepared.test.iter().zip(test_conf) {
            scores.push(score_row(&prepared.augmented, i, Split::Test, c));
        }
    }
    let evaluated = if prepared.test.is_empty() { Split::Validation } else { Split::Test };
    let rows: Vec<&ScoreRow> = scores.iter().filter(|r| r.split == evaluated).collect();
    let preds: Vec<u8> = rows.iter().map(|r| u8::from(r.conf >= DEFAULT_THRESHOLD)).collect();
    let metrics = evaluate_rows(&rows, &preds)?;
    let predictions = prediction_rows(&rows, &preds, &preds);

    let summary = RunSummary {
        run_id: run,
        provenance: prepared.provenance.clone(),
        parent: None,
        evaluated_split: evaluated,
        metrics_default: metrics.clone(),
        metrics,
        flips: 0,
        thresholds: None,
        cv: Some(CvSummary {
            macro_f1: cv.macro_f1.clone(),
            fold_macro_f1: cv.folds.iter().map(|f| f.report.macro_f1).collect(),
            best_epochs: cv.folds.iter().map(|f| f.best_epoch).collect(),
        }),
        best_params: Some(best),
        embedding_source: Some(prepared.embeddings.source_tag().to_string()),
    };
    let art = RunArtifact {
        summary,
        scores,
        predictions,
        study: Some(study),
        curve: Vec::new(),
    };
    Ok((art, cv_summary_csv(&cv)))
}

fn score_row(corpus: &Corpus, i: usize, split: Split, conf: f64) -> ScoreRow {
    let ex = &corpus.examples()[i];
    ScoreRow {
        id: ex.id.clone(),
        lang: ex.lang,
        split,
        conf,
        label: ex.label,
    }
}

/// Mean confidence of the fold checkpoints.
fn ensemble_confidences(cv: &CvResult, x: &EmbeddingMatrix) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; x.rows()];
    for fold in &cv.folds {
        for (s, c) in sum.iter_mut().zip(predict_confidences(&fold.model, x)?) {
            *s += c;
        }
    }
    let k = cv.folds.len() as f64;
    Ok(sum.into_iter().map(|s| s / k).collect())
}

fn evaluate_rows(rows: &[&ScoreRow], preds: &[u8]) -> Result<crate::evaluation::MetricsReport> {
    let labels: Vec<u8> = rows.iter().map(|r| r.label).collect();
    let confs: Vec<f64> = rows.iter().map(|r| r.conf).collect();
    let langs: Vec<Lang> = rows.iter().map(|r| r.lang).collect();
    evaluate(&labels, &confs, preds, &langs)
}

fn prediction_rows(rows: &[&ScoreRow], default: &[u8], thresholded: &[u8]) -> Vec<PredictionRow> {
    rows.iter()
        .zip(default.iter().zip(thresholded))
        .map(|(r, (&d, &t))| PredictionRow {
            id: r.id.clone(),
            lang: r.lang,
            conf: r.conf,
            pred_default: d,
            pred_thresholded: t,
        })
        .collect()
}

fn threshold_run(cfg: &PipelineConfig, run: RunId, parent: RunId) -> Result<RunArtifact> {
    let parent_dir = cfg.run_dir(parent);
    let parent_art = read_artifact(&parent_dir, parent).map_err(|e| match e {
        Error::Dependency(m) => Error::Dependency(format!("{run} depends on {parent}: {m}")),
        other => other,
    })?;
    let provenance = Provenance {
        seed: cfg.seed,
        input_sha256: InputHasher::default()
            .file(&parent_dir.join(super::artifact::SCORES))?
            .part(run.as_str().as_bytes())
            .finish(),
    };

    let validation: Vec<ScoredPrediction> = parent_art
        .scores
        .iter()
        .filter(|r| r.split == Split::Validation)
        .map(ScoreRow::scored)
        .collect();
    let tmap = sweep_thresholds(&validation)?;
    let curve = threshold_curve(&validation)?;

    let evaluated = parent_art.summary.evaluated_split;
    let rows: Vec<&ScoreRow> = parent_art.scores.iter().filter(|r| r.split == evaluated).collect();
    let scored: Vec<ScoredPrediction> = rows.iter().map(|r| r.scored()).collect();
    let applied = apply_thresholds(&scored, &tmap);
    let default: Vec<u8> = rows.iter().map(|r| u8::from(r.conf >= DEFAULT_THRESHOLD)).collect();

    let summary = RunSummary {
        run_id: run,
        provenance,
        parent: Some(parent),
        evaluated_split: evaluated,
        metrics: evaluate_rows(&rows, &applied.preds)?,
        metrics_default: evaluate_rows(&rows, &default)?,
        flips: applied.flips,
        thresholds: Some(tmap),
        cv: None,
        best_params: None,
        embedding_source: parent_art.summary.embedding_source.clone(),
    };
    let predictions = prediction_rows(&rows, &default, &applied.preds);
    Ok(RunArtifact {
        summary,
        scores: parent_art.scores,
        predictions,
        study: None,
        curve,
    })
}

/// Execute one run and write its files under `output_dir/<run>/`.
///
/// RUN 1 and RUN 2 augment, search, cross-validate and score; RUN 3 and
/// RUN 4 refit per-language thresholds on the parent's out-of-fold scores.
pub fn execute_run(cfg: &PipelineConfig, run: RunId) -> Result<(RunArtifact, Vec<PathBuf>)> {
    let (art, cv_csv) = match run.parent() {
        None => {
            let (art, csv) = scoring_run(cfg, run)?;
            (art, Some(csv))
        }
        Some(parent) => (threshold_run(cfg, run, parent)?, None),
    };
    let files = write_artifact(&cfg.run_dir(run), &art, cv_csv.as_deref())?;
    Ok((art, files))
}

/// Write the back-translated corpus to `output_dir/augmented.jsonl` with its
/// provenance in `augmented.provenance.json`.
pub fn write_augmented(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let corpus = load_corpus(&cfg.corpus_path)?;
    let translator = Translator::new(cfg.translator.clone())?;
    let augmented = augment_corpus(&corpus, &translator)?;
    let endpoint = serde_json::to_vec(&(&cfg.translator.kind, &cfg.translator.model_name))?;
    let prov = Provenance {
        seed: cfg.seed,
        input_sha256: InputHasher::default().file(&cfg.corpus_path)?.part(&endpoint).finish(),
    };
    let data = cfg.output_dir.join("augmented.jsonl");
    let meta = cfg.output_dir.join("augmented.provenance.json");
    super::artifact::write_file(&data, augmented.to_jsonl().as_bytes())?;
    super::artifact::write_file(
        &meta,
        &super::artifact::json_with_provenance(
            &prov,
            &serde_json::json!({ "rows": augmented.len(), "native_rows": corpus.len() }),
        ),
    )?;
    Ok(vec![data, meta])
}

/// Search alone, written to `output_dir/hpo/<run>/`.
pub fn write_study(cfg: &PipelineConfig, run: RunId) -> Result<(Study, Vec<PathBuf>)> {
    if run.parent().is_some() {
        return Err(Error::Config(format!("{run} has no search; use run1 or run2")));
    }
    let prepared = prepare(cfg, run)?;
    let study = run_study(cfg, &prepared)?;
    let dir = cfg.output_dir.join("hpo").join(run.as_str());
    let jsonl = dir.join(super::artifact::HPO_JSONL);
    let csv = dir.join(super::artifact::HPO_CSV);
    super::artifact::write_file(&jsonl, study.to_jsonl().as_bytes())?;
    super::artifact::write_file(&csv, format!("{}{}", prepared.provenance.comment(), study.to_csv()).as_bytes())?;
    Ok((study, vec![jsonl, csv]))
}
