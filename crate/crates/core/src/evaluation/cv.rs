use rayon::prelude::*;
use serde::Serialize;

use super::folds::{stratified_folds, FoldSplit};
use super::interval::{confidence_interval, IntervalEstimate};
use super::metrics::{evaluate, MetricsReport};
use crate::corpus::{Corpus, Lang};
use crate::error::{Error, Result};
use crate::features::EmbeddingMatrix;
use crate::rng;
use crate::training::{predict_confidences, Control, LinearModel, LossConfig, TrainConfig, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub best_epoch: usize,
    pub report: MetricsReport,
    #[serde(skip)]
    pub model: LinearModel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub folds: Vec<FoldOutcome>,
    pub macro_f1: IntervalEstimate,
    /// Held-out confidence of every corpus row under its fold's best checkpoint.
    pub oof_confidences: Vec<f64>,
    /// Mean validation macro-F1 across folds after each epoch.
    pub epoch_means: Vec<f64>,
    #[serde(skip)]
    pub split: FoldSplit,
}

pub fn cross_validate(
    corpus: &Corpus,
    embeddings: &EmbeddingMatrix,
    cfg: &TrainConfig,
    loss: &LossConfig,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    cross_validate_with(corpus, embeddings, cfg, loss, k, seed, None)
}

/// k-fold cross-validation with the fold trainers advanced in lockstep.
///
/// After every epoch the hook sees the mean validation macro-F1 across folds
/// and may stop all folds at once. Folds run in parallel; results are merged
/// in fold order. Fold `f` trains with the seed derived from
/// `(cfg.seed, "fold", f)`.
pub fn cross_validate_with(
    corpus: &Corpus,
    embeddings: &EmbeddingMatrix,
    cfg: &TrainConfig,
    loss: &LossConfig,
    k: usize,
    seed: u64,
    mut hook: Option<&mut dyn FnMut(usize, f64) -> Control>,
) -> Result<CvResult> {
    if embeddings.rows() != corpus.len() {
        return Err(Error::Alignment {
            found: embeddings.rows(),
            expected: corpus.len(),
        });
    }
    let split = stratified_folds(corpus, k, seed)?;
    if let Some(f) = split.folds.iter().position(Vec::is_empty) {
        return Err(Error::InsufficientData(format!("fold {f} is empty")));
    }
    let labels = corpus.labels();
    let langs = corpus.langs();

    struct FoldData {
        train_x: EmbeddingMatrix,
        train_y: Vec<u8>,
        val_x: EmbeddingMatrix,
        val_y: Vec<u8>,
    }
    let data: Vec<FoldData> = (0..k)
        .map(|f| {
            let tr = split.train_indices(f);
            let va = split.val_indices(f);
            FoldData {
                train_x: embeddings.select(&tr),
                train_y: tr.iter().map(|&i| labels[i]).collect(),
                val_x: embeddings.select(va),
                val_y: va.iter().map(|&i| labels[i]).collect(),
            }
        })
        .collect();

    let mut trainers = data
        .iter()
        .enumerate()
        .map(|(f, d)| {
            let fold_cfg = TrainConfig {
                seed: rng::derive_seed(cfg.seed, "fold", f as u64),
                ..cfg.clone()
            };
            Trainer::new(&d.train_x, &d.train_y, &d.val_x, &d.val_y, &fold_cfg, loss)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut epoch_means = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let scores = trainers
            .par_iter_mut()
            .map(|t| t.run_epoch().map(|s| s.val_macro_f1))
            .collect::<Result<Vec<f64>>>()?;
        let mean = scores.iter().sum::<f64>() / k as f64;
        epoch_means.push(mean);
        if let Some(h) = hook.as_mut() {
            if h(epoch, mean) == Control::Stop {
                break;
            }
        }
    }

    let mut oof = vec![f64::NAN; corpus.len()];
    let mut folds = Vec::with_capacity(k);
    for (f, (trainer, d)) in trainers.into_iter().zip(&data).enumerate() {
        let best = trainer.into_best()?;
        let confs = predict_confidences(&best.model, &d.val_x)?;
        let va = split.val_indices(f);
        for (&i, &c) in va.iter().zip(&confs) {
            oof[i] = c;
        }
        let preds: Vec<u8> = confs.iter().map(|&c| u8::from(c >= 0.5)).collect();
        let fold_langs: Vec<Lang> = va.iter().map(|&i| langs[i]).collect();
        let report = evaluate(&d.val_y, &confs, &preds, &fold_langs)?;
        folds.push(FoldOutcome {
            fold: f,
            best_epoch: best.epoch,
            report,
            model: best.model,
        });
    }
    let fold_f1: Vec<f64> = folds.iter().map(|o| o.report.macro_f1).collect();
    Ok(CvResult {
        macro_f1: confidence_interval(&fold_f1, 0.95)?,
        folds,
        oof_confidences: oof,
        epoch_means,
        split,
    })
}
