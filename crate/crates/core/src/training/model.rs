use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-logit linear head: `logits = W x + b`, `W` stored row-major as 2×dim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: [f64; 2],
}

/// Gradients share the model's layout.
pub type Gradients = LinearModel;

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            dim,
            weights: vec![0.0; 2 * dim],
            bias: [0.0; 2],
        }
    }

    pub fn from_parts(weights: [Vec<f64>; 2], bias: [f64; 2]) -> Result<Self> {
        let dim = weights[0].len();
        if weights[1].len() != dim {
            return Err(Error::Shape("weight rows differ in length".into()));
        }
        let model = LinearModel {
            dim,
            weights: weights.concat(),
            bias,
        };
        model.check_finite()?;
        Ok(model)
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.weights.iter().chain(&self.bias).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric("model has non-finite parameters".into()))
        }
    }

    pub(crate) fn same_shape(&self, other: &LinearModel) -> bool {
        self.dim == other.dim && self.weights.len() == other.weights.len()
    }

    /// Eval-mode logits.
    pub fn logits(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.dim
            )));
        }
        let dot = |row: &[f64]| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        Ok([dot(self.row(0)) + self.bias[0], dot(self.row(1)) + self.bias[1]])
    }

    pub fn confidence(&self, x: &[f64]) -> Result<f64> {
        softmax_confidence(self.logits(x)?)
    }
}

/// Inverted input dropout: each coordinate is zeroed with probability `p`
/// and survivors are scaled by `1 / (1 - p)`.
pub fn apply_dropout<R: Rng + ?Sized>(x: &mut [f64], p: f64, rng: &mut R) {
    if p <= 0.0 {
        return;
    }
    let scale = 1.0 / (1.0 - p);
    for v in x {
        if rng.random::<f64>() < p {
            *v = 0.0;
        } else {
            *v *= scale;
        }
    }
}

pub fn forward<R: Rng + ?Sized>(
    model: &LinearModel,
    x: &[f64],
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<[f64; 2]> {
    if !training {
        return model.logits(x);
    }
    let mut dropped = x.to_vec();
    apply_dropout(&mut dropped, dropout, rng);
    model.logits(&dropped)
}

/// P(class 1) from the two logits, evaluated without overflow.
pub fn softmax_confidence(logits: [f64; 2]) -> Result<f64> {
    let [z0, z1] = logits;
    if !z0.is_finite() || !z1.is_finite() {
        return Err(Error::Numeric(format!("non-finite logits ({z0}, {z1})")));
    }
    let m = z0.max(z1);
    let e0 = (z0 - m).exp();
    let e1 = (z1 - m).exp();
    Ok(e1 / (e0 + e1))
}
