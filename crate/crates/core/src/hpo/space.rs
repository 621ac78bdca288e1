use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::TrainConfig;

/// Concrete parameter values keyed by name.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamSpec {
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    Categorical { choices: Vec<f64> },
}

impl ParamSpec {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            ParamSpec::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            ParamSpec::LogUniform { low, high } => *low > 0.0 && high.is_finite() && low < high,
            ParamSpec::Categorical { choices } => {
                !choices.is_empty() && choices.iter().all(|c| c.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid search range for {name}: {self:?}")))
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            ParamSpec::Uniform { low, high } | ParamSpec::LogUniform { low, high } => {
                (*low..=*high).contains(&v)
            }
            ParamSpec::Categorical { choices } => choices.contains(&v),
        }
    }

    /// Bounds in the space the Parzen estimator works in (log for log-uniform).
    pub(crate) fn internal_bounds(&self) -> Option<(f64, f64)> {
        match self {
            ParamSpec::Uniform { low, high } => Some((*low, *high)),
            ParamSpec::LogUniform { low, high } => Some((low.ln(), high.ln())),
            ParamSpec::Categorical { .. } => None,
        }
    }

    pub(crate) fn to_internal(&self, v: f64) -> f64 {
        match self {
            ParamSpec::LogUniform { .. } => v.ln(),
            _ => v,
        }
    }

    /// Map an internal value back, clamped into the declared range.
    pub(crate) fn from_internal(&self, x: f64) -> f64 {
        match self {
            ParamSpec::Uniform { low, high } => x.clamp(*low, *high),
            ParamSpec::LogUniform { low, high } => x.exp().clamp(*low, *high),
            ParamSpec::Categorical { choices } => choices[x as usize],
        }
    }

    pub(crate) fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ParamSpec::Categorical { choices } => choices[rng.random_range(0..choices.len())],
            _ => {
                let (a, b) = self.internal_bounds().expect("continuous");
                self.from_internal(rng.random_range(a..=b))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    pub params: BTreeMap<String, ParamSpec>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        let mut params = BTreeMap::new();
        params.insert("learning_rate".into(), ParamSpec::LogUniform { low: 1e-5, high: 5e-4 });
        params.insert("batch_size".into(), ParamSpec::Categorical { choices: vec![16.0, 32.0, 64.0] });
        params.insert("weight_decay".into(), ParamSpec::LogUniform { low: 1e-5, high: 1e-2 });
        params.insert("dropout".into(), ParamSpec::Uniform { low: 0.1, high: 0.4 });
        SearchSpace { params }
    }
}

impl SearchSpace {
    pub fn single(name: &str, spec: ParamSpec) -> Self {
        SearchSpace {
            params: BTreeMap::from([(name.to_string(), spec)]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config("search space is empty".into()));
        }
        for (name, spec) in &self.params {
            spec.validate(name)?;
        }
        Ok(())
    }

    pub fn contains(&self, params: &Params) -> bool {
        params.len() == self.params.len()
            && self
                .params
                .iter()
                .all(|(k, spec)| params.get(k).is_some_and(|&v| spec.contains(v)))
    }
}

/// Overlay searched values onto a base training configuration.
pub fn apply_params(base: &TrainConfig, params: &Params) -> Result<TrainConfig> {
    let mut cfg = base.clone();
    for (name, &v) in params {
        match name.as_str() {
            "learning_rate" => cfg.learning_rate = v,
            "batch_size" => {
                if v.fract() != 0.0 || v < 1.0 {
                    return Err(Error::Config(format!("batch_size must be a positive integer, got {v}")));
                }
                cfg.batch_size = v as usize;
            }
            "weight_decay" => cfg.weight_decay = v,
            "dropout" => cfg.dropout = v,
            other => return Err(Error::Config(format!("unknown training parameter {other}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
