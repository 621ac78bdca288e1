//! Training of the 2-logit linear head over fixed embeddings.
//!
//! Each epoch draws a fresh 1:3 undersampled [`BatchPlan`], applies input
//! dropout, takes one AdamW step per batch on a warmup/decay schedule and
//! scores the validation split at threshold 0.5. The best epoch by
//! validation macro-F1 (strict improvement only) is kept as the checkpoint.

mod loss;
mod model;
mod optim;
mod sampler;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use loss::{loss_and_grad, LossConfig, LossKind};
pub use model::{apply_dropout, forward, softmax_confidence, Gradients, LinearModel};
pub use optim::{lr_at_step, optimizer_step, AdamState};
pub use sampler::{batch_capacity, plan_epoch, BatchPlan};

use crate::error::{Error, Result};
use crate::evaluation::{confusion, metrics};
use crate::features::EmbeddingMatrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    pub warmup_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            weight_decay: 1e-2,
            dropout: 0.1,
            max_epochs: 10,
            warmup_fraction: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        sampler::check_batch_size(self.batch_size)?;
        let bad = |what: &str| Err(Error::Config(format!("invalid train config: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub model: LinearModel,
    pub epoch: usize,
    pub val_macro_f1: f64,
}

/// Answer of a pruning hook after each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_macro_f1: f64,
}

/// Epoch-steppable trainer. Cross-validation drives several of these in
/// lockstep so per-epoch scores can be averaged across folds.
#[derive(Debug)]
pub struct Trainer<'a> {
    train_x: &'a EmbeddingMatrix,
    train_y: &'a [u8],
    val_x: &'a EmbeddingMatrix,
    val_y: &'a [u8],
    cfg: TrainConfig,
    loss: LossConfig,
    model: LinearModel,
    adam: AdamState,
    step: u64,
    total_steps: u64,
    epoch: usize,
    best: Option<Checkpoint>,
    log: Vec<EpochSummary>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        train_x: &'a EmbeddingMatrix,
        train_y: &'a [u8],
        val_x: &'a EmbeddingMatrix,
        val_y: &'a [u8],
        cfg: &TrainConfig,
        loss: &LossConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        loss.validate()?;
        if train_x.rows() != train_y.len() || val_x.rows() != val_y.len() {
            return Err(Error::Shape(format!(
                "train {}x vs {}y, val {}x vs {}y",
                train_x.rows(),
                train_y.len(),
                val_x.rows(),
                val_y.len()
            )));
        }
        if train_x.dim() != val_x.dim() {
            return Err(Error::Shape("train and validation dims differ".into()));
        }
        if val_y.is_empty() {
            return Err(Error::EmptyInput("validation split is empty"));
        }
        // fails early with the capacity error when pools are too small
        let plan = plan_epoch(train_y, cfg.batch_size, cfg.seed, 1)?;
        let total_steps = (plan.len() * cfg.max_epochs) as u64;
        let dim = train_x.dim();
        Ok(Trainer {
            train_x,
            train_y,
            val_x,
            val_y,
            cfg: cfg.clone(),
            loss: *loss,
            model: LinearModel::zeros(dim),
            adam: AdamState::new(dim),
            step: 0,
            total_steps,
            epoch: 0,
            best: None,
            log: Vec::new(),
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn finished(&self) -> bool {
        self.epoch >= self.cfg.max_epochs
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn best(&self) -> Option<&Checkpoint> {
        self.best.as_ref()
    }

    pub fn log(&self) -> &[EpochSummary] {
        &self.log
    }

    pub fn into_best(self) -> Result<Checkpoint> {
        self.best
            .ok_or_else(|| Error::InsufficientData("no epoch was trained".into()))
    }

    pub fn run_epoch(&mut self) -> Result<EpochSummary> {
        if self.finished() {
            return Err(Error::Config("trainer already ran max_epochs".into()));
        }
        self.epoch += 1;
        let epoch = self.epoch as u64;
        let plan = plan_epoch(self.train_y, self.cfg.batch_size, self.cfg.seed, epoch)?;
        let mut dropout_rng = rng::stream(self.cfg.seed, "dropout", epoch);

        let mut loss_sum = 0.0;
        let mut batch_x: Vec<Vec<f64>> = Vec::with_capacity(self.cfg.batch_size);
        let mut batch_y: Vec<u8> = Vec::with_capacity(self.cfg.batch_size);
        for batch in &plan.batches {
            batch_x.clear();
            batch_y.clear();
            for &i in batch {
                let mut x: Vec<f64> = self.train_x.row(i).iter().map(|&v| f64::from(v)).collect();
                apply_dropout(&mut x, self.cfg.dropout, &mut dropout_rng);
                batch_x.push(x);
                batch_y.push(self.train_y[i]);
            }
            let (loss, grads) = loss_and_grad(&self.model, &batch_x, &batch_y, &self.loss)?;
            let lr = lr_at_step(
                self.cfg.learning_rate,
                self.step,
                self.total_steps,
                self.cfg.warmup_fraction,
            )?;
            optimizer_step(&mut self.model, &grads, &mut self.adam, lr, &self.cfg)?;
            self.step += 1;
            loss_sum += loss;
        }
        self.model.check_finite()?;

        let confs = predict_confidences(&self.model, self.val_x)?;
        let preds: Vec<u8> = confs.iter().map(|&c| u8::from(c >= 0.5)).collect();
        let val_macro_f1 = metrics(&confusion(self.val_y, &preds)?).macro_f1;

        if self.best.as_ref().is_none_or(|b| val_macro_f1 > b.val_macro_f1) {
            self.best = Some(Checkpoint {
                model: self.model.clone(),
                epoch: self.epoch,
                val_macro_f1,
            });
        }
        let summary = EpochSummary {
            epoch: self.epoch,
            train_loss: loss_sum / plan.len().max(1) as f64,
            val_macro_f1,
        };
        self.log.push(summary);
        Ok(summary)
    }
}

/// Full training run; the hook sees `(epoch, val_macro_f1)` after every
/// epoch and may stop training early.
pub fn train(
    train_x: &EmbeddingMatrix,
    train_y: &[u8],
    val_x: &EmbeddingMatrix,
    val_y: &[u8],
    cfg: &TrainConfig,
    loss: &LossConfig,
    mut hook: Option<&mut dyn FnMut(usize, f64) -> Control>,
) -> Result<Checkpoint> {
    let mut trainer = Trainer::new(train_x, train_y, val_x, val_y, cfg, loss)?;
    while !trainer.finished() {
        let s = trainer.run_epoch()?;
        if let Some(h) = hook.as_mut() {
            if h(s.epoch, s.val_macro_f1) == Control::Stop {
                break;
            }
        }
    }
    trainer.into_best()
}

/// Eval-mode P(class 1) for every row.
pub fn predict_confidences(model: &LinearModel, x: &EmbeddingMatrix) -> Result<Vec<f64>> {
    if x.dim() != model.dim {
        return Err(Error::Shape(format!(
            "features have dim {}, model expects {}",
            x.dim(),
            model.dim
        )));
    }
    let mut buf = vec![0.0; x.dim()];
    (0..x.rows())
        .map(|i| {
            for (b, &v) in buf.iter_mut().zip(x.row(i)) {
                *b = f64::from(v);
            }
            model.confidence(&buf)
        })
        .collect()
}

const CKPT_MAGIC: &[u8] = b"CKPT1\n";

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    dim: usize,
    epoch: usize,
    val_macro_f1: f64,
    source_tag: String,
    dtype: String,
}

impl Checkpoint {
    /// Magic line, JSON header line, then `2*dim` weights and 2 biases as f64le.
    pub fn to_bytes(&self, source_tag: &str) -> Vec<u8> {
        let header = CheckpointHeader {
            dim: self.model.dim,
            epoch: self.epoch,
            val_macro_f1: self.val_macro_f1,
            source_tag: source_tag.to_string(),
            dtype: "f64le".into(),
        };
        let mut out = CKPT_MAGIC.to_vec();
        out.extend(serde_json::to_vec(&header).expect("header"));
        out.push(b'\n');
        for v in self.model.weights.iter().chain(&self.model.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Checkpoint, String)> {
        let rest = bytes
            .strip_prefix(CKPT_MAGIC)
            .ok_or_else(|| Error::Format("missing CKPT1 magic line".into()))?;
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("unterminated checkpoint header".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(&rest[..nl])
            .map_err(|e| Error::Format(format!("bad checkpoint header: {e}")))?;
        let payload = &rest[nl + 1..];
        let n = 2 * header.dim + 2;
        if header.dtype != "f64le" || payload.len() != n * 8 {
            return Err(Error::Format("checkpoint payload does not match header".into()));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let model = LinearModel {
            dim: header.dim,
            weights: values[..2 * header.dim].to_vec(),
            bias: [values[n - 2], values[n - 1]],
        };
        model.check_finite()?;
        Ok((
            Checkpoint {
                model,
                epoch: header.epoch,
                val_macro_f1: header.val_macro_f1,
            },
            header.source_tag,
        ))
    }

    pub fn save(&self, path: &Path, source_tag: &str) -> Result<()> {
        fs::write(path, self.to_bytes(source_tag)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Checkpoint, String)> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
