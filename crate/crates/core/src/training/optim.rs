use super::model::{Gradients, LinearModel};
use super::TrainConfig;
use crate::error::{Error, Result};

/// Linear warmup to `base_lr` over `round(warmup_fraction * total_steps)`
/// steps, then linear decay to zero at `total_steps`.
pub fn lr_at_step(base_lr: f64, step: u64, total_steps: u64, warmup_fraction: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::DegenerateSchedule);
    }
    if step > total_steps {
        return Err(Error::Config(format!(
            "schedule step {step} is past total_steps {total_steps}"
        )));
    }
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(Error::Config(format!(
            "warmup fraction must lie in [0, 1), got {warmup_fraction}"
        )));
    }
    let warmup = (warmup_fraction * total_steps as f64).round() as u64;
    let lr = if warmup > 0 && step <= warmup {
        base_lr * step as f64 / warmup as f64
    } else {
        base_lr * (total_steps - step) as f64 / (total_steps - warmup) as f64
    };
    Ok(lr)
}

/// First/second moment accumulators for AdamW.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub step: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: LinearModel::zeros(dim),
            v: LinearModel::zeros(dim),
            step: 0,
        }
    }
}

/// One AdamW update with bias correction. Weight decay is decoupled and only
/// touches the weight matrix, never the bias.
pub fn optimizer_step(
    model: &mut LinearModel,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    if !model.same_shape(grads) || !model.same_shape(&state.m) || !model.same_shape(&state.v) {
        return Err(Error::Shape("optimizer state does not match the model".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (cfg.beta1, cfg.beta2, cfg.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    let update = |theta: &mut f64, g: f64, m: &mut f64, v: &mut f64, decay: f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *theta -= lr * (m_hat / (v_hat.sqrt() + eps) + decay * *theta);
    };

    for i in 0..model.weights.len() {
        update(
            &mut model.weights[i],
            grads.weights[i],
            &mut state.m.weights[i],
            &mut state.v.weights[i],
            cfg.weight_decay,
        );
    }
    for i in 0..2 {
        update(
            &mut model.bias[i],
            grads.bias[i],
            &mut state.m.bias[i],
            &mut state.v.bias[i],
            0.0,
        );
    }
    Ok(())
}
