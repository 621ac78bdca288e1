use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::space::{ParamSpec, Params, SearchSpace};
use super::study::TrialRecord;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    pub n_startup: usize,
    pub gamma: f64,
    pub n_candidates: usize,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            n_startup: 10,
            gamma: 0.25,
            n_candidates: 24,
            seed: 0,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_startup == 0 || self.n_candidates == 0 || !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "TPE needs n_startup >= 1, n_candidates >= 1 and gamma in (0, 1): {self:?}"
            )));
        }
        Ok(())
    }
}

/// Truncated-Gaussian mixture on `[low, high]` with equal component weights.
struct Parzen {
    low: f64,
    high: f64,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    masses: Vec<f64>,
}

fn std_normal() -> Normal {
    Normal::standard()
}

impl Parzen {
    /// One kernel per observation plus a prior kernel centred on the range.
    ///
    /// Bandwidth is Scott's `sd · n^(-1/5)`, at least `range / min(100, n + 1)`
    /// and `1e-3 · range`, at most `range`.
    fn fit(obs: &[f64], low: f64, high: f64) -> Parzen {
        let range = high - low;
        let n = obs.len();
        let sigma = if n > 1 {
            let mean = obs.iter().sum::<f64>() / n as f64;
            let sd = (obs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            sd * (n as f64).powf(-0.2)
        } else {
            0.0
        };
        let floor = (range / (n as f64 + 1.0).min(100.0)).max(1e-3 * range);
        let sigma = sigma.clamp(floor, range);
        let mut mus = obs.to_vec();
        let mut sigmas = vec![sigma; n];
        mus.push(0.5 * (low + high));
        sigmas.push(range);
        let z = std_normal();
        let masses = mus
            .iter()
            .zip(&sigmas)
            .map(|(&m, &s)| (z.cdf((high - m) / s) - z.cdf((low - m) / s)).max(f64::MIN_POSITIVE))
            .collect();
        Parzen {
            low,
            high,
            mus,
            sigmas,
            masses,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z = std_normal();
        let k = rng.random_range(0..self.mus.len());
        let (m, s) = (self.mus[k], self.sigmas[k]);
        let lo = z.cdf((self.low - m) / s);
        let hi = z.cdf((self.high - m) / s);
        let u = lo + (hi - lo) * rng.random::<f64>();
        let x = m + s * z.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16));
        x.clamp(self.low, self.high)
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let z = std_normal();
        let w = 1.0 / self.mus.len() as f64;
        let p: f64 = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .zip(&self.masses)
            .map(|((&m, &s), &mass)| w * z.pdf((x - m) / s) / (s * mass))
            .sum();
        p.max(f64::MIN_POSITIVE).ln()
    }
}

/// Value a trial contributes to the density split: the final value of a
/// complete trial or the last intermediate value of a pruned one.
fn usable_value(t: &TrialRecord) -> Option<f64> {
    use super::study::TrialState;
    match t.state {
        TrialState::Complete => t.final_value,
        TrialState::Pruned => t.intermediate.values().next_back().copied(),
        _ => None,
    }
    .filter(|v| v.is_finite())
}

/// Propose parameters for trial `trial_id` given the study history.
///
/// Below `n_startup` usable trials every parameter is drawn from its prior.
/// Afterwards each parameter is handled independently: the top
/// `ceil(gamma * n)` trials form the good set, the rest the bad set, and the
/// candidate drawn from the good density with the highest `l / g` wins.
pub fn suggest(history: &[TrialRecord], space: &SearchSpace, cfg: &TpeConfig, trial_id: usize) -> Result<Params> {
    space.validate()?;
    cfg.validate()?;
    let mut r = rng::stream(cfg.seed, "tpe", trial_id as u64);

    let mut usable: Vec<(&TrialRecord, f64)> = history
        .iter()
        .filter_map(|t| usable_value(t).map(|v| (t, v)))
        .collect();
    if usable.len() < cfg.n_startup {
        return Ok(space
            .params
            .iter()
            .map(|(name, spec)| (name.clone(), spec.sample_prior(&mut r)))
            .collect());
    }

    usable.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.trial_id.cmp(&b.0.trial_id)));
    let n_good = ((cfg.gamma * usable.len() as f64).ceil() as usize).clamp(1, usable.len());
    let (good, bad) = usable.split_at(n_good);

    let mut out = Params::new();
    for (name, spec) in &space.params {
        let obs = |set: &[(&TrialRecord, f64)]| -> Vec<f64> {
            set.iter()
                .filter_map(|(t, _)| t.params.get(name))
                .map(|&v| spec.to_internal(v))
                .collect()
        };
        let value = match spec {
            ParamSpec::Categorical { choices } => {
                let weights = |xs: Vec<f64>| -> Vec<f64> {
                    let mut w = vec![1.0; choices.len()];
                    for x in xs {
                        if let Some(i) = choices.iter().position(|&c| c == x) {
                            w[i] += 1.0;
                        }
                    }
                    let total: f64 = w.iter().sum();
                    w.into_iter().map(|v| v / total).collect()
                };
                let l = weights(obs(good));
                let g = weights(obs(bad));
                let mut best = (f64::NEG_INFINITY, 0usize);
                for _ in 0..cfg.n_candidates {
                    let mut u = r.random::<f64>();
                    let mut pick = l.len() - 1;
                    for (i, &p) in l.iter().enumerate() {
                        if u < p {
                            pick = i;
                            break;
                        }
                        u -= p;
                    }
                    let score = l[pick].ln() - g[pick].ln();
                    if score > best.0 {
                        best = (score, pick);
                    }
                }
                choices[best.1]
            }
            _ => {
                let (low, high) = spec.internal_bounds().expect("continuous");
                let l = Parzen::fit(&obs(good), low, high);
                let g = Parzen::fit(&obs(bad), low, high);
                let mut best = (f64::NEG_INFINITY, low);
                for _ in 0..cfg.n_candidates {
                    let x = l.sample(&mut r);
                    let score = l.log_pdf(x) - g.log_pdf(x);
                    if score > best.0 {
                        best = (score, x);
                    }
                }
                spec.from_internal(best.1)
            }
        };
        out.insert(name.clone(), value);
    }
    Ok(out)
}
