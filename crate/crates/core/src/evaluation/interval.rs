use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::t_quantile_975;

pub const T_INTERVAL: &str = "student-t over fold scores";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub level: f64,
    pub method: String,
}

impl IntervalEstimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// `mean ± t_{k-1, 0.975} · s / √k` with the sample standard deviation `s`.
pub fn confidence_interval(scores: &[f64], level: f64) -> Result<IntervalEstimate> {
    if level != 0.95 {
        return Err(Error::Config(format!("only 0.95 intervals are supported, got {level}")));
    }
    if scores.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "a confidence interval needs at least 2 scores, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite fold score".into()));
    }
    let k = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / k;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let t = t_quantile_975(scores.len() - 1)?;
    Ok(IntervalEstimate {
        mean,
        half_width: t * var.sqrt() / k.sqrt(),
        level,
        method: T_INTERVAL.into(),
    })
}
