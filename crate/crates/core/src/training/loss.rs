use serde::{Deserialize, Serialize};

use super::model::{Gradients, LinearModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    WeightedCe,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Weight of the negative (non-reclamatory) class.
    pub w0: f64,
    /// Weight of the positive class.
    pub w1: f64,
    pub hinge_c: f64,
}

impl Default for LossConfig {
    /// Class weights inversely proportional to the 1:3 sampled stream.
    fn default() -> Self {
        LossConfig {
            kind: LossKind::WeightedCe,
            w0: 1.0 / 3.0,
            w1: 1.0,
            hinge_c: 1.0,
        }
    }
}

impl LossConfig {
    pub fn hinge(c: f64) -> Self {
        LossConfig {
            kind: LossKind::Hinge,
            hinge_c: c,
            ..LossConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w0 > 0.0 && self.w1 > 0.0 && self.hinge_c > 0.0) {
            return Err(Error::Config(format!(
                "loss weights and C must be positive (w0={}, w1={}, C={})",
                self.w0, self.w1, self.hinge_c
            )));
        }
        Ok(())
    }
}

/// Mean batch loss and its (sub)gradient with respect to the model.
///
/// Weighted CE: `-w_y log p_y` per example. Hinge: `max(0, 1 - s m)` on the
/// margin `m = z1 - z0` with `s = ±1`, plus `λ‖W‖²/2` where
/// `λ = 1 / (C · batch_len)`.
pub fn loss_and_grad(
    model: &LinearModel,
    batch_x: &[Vec<f64>],
    batch_y: &[u8],
    cfg: &LossConfig,
) -> Result<(f64, Gradients)> {
    if batch_x.is_empty() {
        return Err(Error::EmptyInput("loss_and_grad needs a non-empty batch"));
    }
    if batch_x.len() != batch_y.len() {
        return Err(Error::Shape(format!(
            "{} inputs but {} labels",
            batch_x.len(),
            batch_y.len()
        )));
    }
    let n = batch_x.len() as f64;
    let mut grads = LinearModel::zeros(model.dim);
    let mut total = 0.0;

    for (x, &y) in batch_x.iter().zip(batch_y) {
        let z = model.logits(x)?;
        // dL/dz for this example, before the 1/n batch mean
        let dz = match cfg.kind {
            LossKind::WeightedCe => {
                let w = if y == 1 { cfg.w1 } else { cfg.w0 };
                let m = z[0].max(z[1]);
                let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
                let p = [(z[0] - lse).exp(), (z[1] - lse).exp()];
                total += -w * (z[usize::from(y)] - lse);
                let mut d = [w * p[0], w * p[1]];
                d[usize::from(y)] -= w;
                d
            }
            LossKind::Hinge => {
                let s = if y == 1 { 1.0 } else { -1.0 };
                let margin = z[1] - z[0];
                let slack = 1.0 - s * margin;
                if slack > 0.0 {
                    total += slack;
                    [s, -s]
                } else {
                    [0.0, 0.0]
                }
            }
        };
        for (c, g) in dz.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let g = g / n;
            let row = &mut grads.weights[c * model.dim..(c + 1) * model.dim];
            for (r, v) in row.iter_mut().zip(x) {
                *r += g * v;
            }
            grads.bias[c] += g;
        }
    }

    let mut loss = total / n;
    if cfg.kind == LossKind::Hinge {
        let lambda = 1.0 / (cfg.hinge_c * n);
        loss += 0.5 * lambda * model.weights.iter().map(|w| w * w).sum::<f64>();
        for (g, w) in grads.weights.iter_mut().zip(&model.weights) {
            *g += lambda * w;
        }
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_logits_ce() {
        let m = LinearModel::zeros(2);
        let x = vec![vec![0.4, -1.0]];
        let (l1, _) = loss_and_grad(&m, &x, &[1], &LossConfig::default()).unwrap();
        assert!((l1 - 2f64.ln()).abs() < 1e-15);
        assert!((l1 - 0.69315).abs() < 1e-5);
        let cfg = LossConfig {
            w0: 0.35,
            ..LossConfig::default()
        };
        let (l0, _) = loss_and_grad(&m, &x, &[0], &cfg).unwrap();
        assert!((l0 - 0.35 * 2f64.ln()).abs() < 1e-15);
        assert!((l0 - 0.24260).abs() < 1e-5);
    }

    #[test]
    fn hinge_beyond_margin_is_zero() {
        // margin z1 - z0 = 2 for label 1
        let mut m = LinearModel::zeros(1);
        m.bias = [-1.0, 1.0];
        let mut cfg = LossConfig::hinge(1.0);
        let (loss, g) = loss_and_grad(&m, &[vec![0.0]], &[1], &cfg).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g.bias, [0.0, 0.0]);
        // wrong side of the margin for label 0: slack 3
        let (loss, g) = loss_and_grad(&m, &[vec![0.0]], &[0], &cfg).unwrap();
        assert_eq!(loss, 3.0);
        assert_eq!(g.bias, [-1.0, 1.0]);
        // regulariser: lambda = 1/(C n)
        cfg.hinge_c = 0.5;
        m.weights = vec![2.0, 0.0];
        let (loss, g) = loss_and_grad(&m, &[vec![0.0], vec![0.0]], &[1, 1], &cfg).unwrap();
        assert!((loss - 0.5 * 1.0 * 4.0).abs() < 1e-12);
        assert!((g.weights[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_batches() {
        let m = LinearModel::zeros(2);
        assert!(matches!(
            loss_and_grad(&m, &[], &[], &LossConfig::default()),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            loss_and_grad(&m, &[vec![0.0, 0.0]], &[1, 0], &LossConfig::default()),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            loss_and_grad(&m, &[vec![0.0]], &[1], &LossConfig::default()),
            Err(Error::Shape(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn ce_gradient_matches_central_differences(
            dim in 1usize..6,
            seed in proptest::prelude::any::<u64>(),
            w0 in 0.05f64..1.0,
        ) {
            use rand::Rng;
            let mut r = crate::rng::stream(seed, "test/fd", 0);
            let x: Vec<Vec<f64>> = (0..4).map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
            let y = [1, 0, 0, 1];
            let mut m = LinearModel::zeros(dim);
            m.weights.iter_mut().for_each(|w| *w = r.random_range(-1.0..1.0));
            let cfg = LossConfig { w0, ..LossConfig::default() };
            let (_, g) = loss_and_grad(&m, &x, &y, &cfg).unwrap();
            let h = 1e-5;
            for p in 0..m.weights.len() {
                let mut up = m.clone();
                up.weights[p] += h;
                let mut down = m.clone();
                down.weights[p] -= h;
                let fd = (loss_and_grad(&up, &x, &y, &cfg).unwrap().0 - loss_and_grad(&down, &x, &y, &cfg).unwrap().0) / (2.0 * h);
                proptest::prop_assert!((fd - g.weights[p]).abs() <= 1e-7 * g.weights[p].abs().max(1.0));
            }
        }
    }
}
