use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::space::{Params, SearchSpace};
use super::tpe::{suggest, TpeConfig};
use crate::error::{Error, Result};
use crate::training::Control;

pub const DEFAULT_PATIENCE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialState {
    Running,
    Complete,
    Pruned,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub params: Params,
    pub intermediate: BTreeMap<usize, f64>,
    pub final_value: Option<f64>,
    pub state: TrialState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruned_at: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median rule: prune iff `epoch >= patience` and `value` is strictly below
/// the median of the completed trials' values reported at this epoch.
pub fn should_prune(epoch: usize, value: f64, history: &[TrialRecord], patience: usize) -> bool {
    if epoch < patience {
        return false;
    }
    let mut at_epoch: Vec<f64> = history
        .iter()
        .filter(|t| t.state == TrialState::Complete)
        .filter_map(|t| t.intermediate.get(&epoch).copied())
        .collect();
    if at_epoch.is_empty() {
        return false;
    }
    value < median(&mut at_epoch)
}

/// Handed to the objective; records intermediate values and answers with
/// the pruning decision.
pub struct TrialReporter<'a> {
    history: &'a [TrialRecord],
    patience: usize,
    intermediate: BTreeMap<usize, f64>,
    pruned_at: Option<usize>,
}

impl TrialReporter<'_> {
    pub fn report(&mut self, epoch: usize, value: f64) -> Control {
        self.intermediate.insert(epoch, value);
        if self.pruned_at.is_none() && should_prune(epoch, value, self.history, self.patience) {
            self.pruned_at = Some(epoch);
        }
        if self.pruned_at.is_some() {
            Control::Stop
        } else {
            Control::Continue
        }
    }

    pub fn is_pruned(&self) -> bool {
        self.pruned_at.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub trials: Vec<TrialRecord>,
    pub best_trial: usize,
}

impl Study {
    pub fn best(&self) -> &TrialRecord {
        &self.trials[self.best_trial]
    }

    pub fn count(&self, state: TrialState) -> usize {
        self.trials.iter().filter(|t| t.state == state).count()
    }

    pub fn to_jsonl(&self) -> String {
        self.trials
            .iter()
            .map(|t| serde_json::to_string(t).expect("trial record") + "\n")
            .collect()
    }

    /// `trial_id,state,value,<params...>` with the running best as well.
    pub fn to_csv(&self) -> String {
        let names: Vec<&String> = self
            .trials
            .first()
            .map(|t| t.params.keys().collect())
            .unwrap_or_default();
        let mut out = String::from("trial_id,state,value,best_so_far");
        for n in &names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        let mut best = f64::NEG_INFINITY;
        for t in &self.trials {
            let value = match t.state {
                TrialState::Complete => t.final_value,
                TrialState::Pruned => t.intermediate.values().next_back().copied(),
                _ => None,
            };
            if t.state == TrialState::Complete {
                best = best.max(t.final_value.unwrap_or(f64::NEG_INFINITY));
            }
            let state = serde_json::to_value(t.state).expect("state");
            let _ = write!(
                out,
                "{},{},{},{}",
                t.trial_id,
                state.as_str().unwrap_or_default(),
                value.map(|v| v.to_string()).unwrap_or_default(),
                if best.is_finite() { best.to_string() } else { String::new() }
            );
            for n in &names {
                let _ = write!(out, ",{}", t.params.get(*n).map(|v| v.to_string()).unwrap_or_default());
            }
            out.push('\n');
        }
        out
    }
}

/// Run `n_trials` sequential trials, maximizing the objective.
///
/// A trial whose objective errors is recorded as failed and the study goes
/// on. A trial whose reporter asked it to stop is recorded as pruned at that
/// epoch. The best trial is the complete trial with the highest value, the
/// earliest one on ties.
pub fn optimize<F>(mut objective: F, space: &SearchSpace, cfg: &TpeConfig, n_trials: usize, patience: usize) -> Result<Study>
where
    F: FnMut(&Params, &mut TrialReporter<'_>) -> Result<f64>,
{
    space.validate()?;
    cfg.validate()?;
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be positive".into()));
    }
    let mut trials: Vec<TrialRecord> = Vec::with_capacity(n_trials);
    for trial_id in 0..n_trials {
        let params = suggest(&trials, space, cfg, trial_id)?;
        let mut reporter = TrialReporter {
            history: &trials,
            patience,
            intermediate: BTreeMap::new(),
            pruned_at: None,
        };
        let outcome = objective(&params, &mut reporter);
        let TrialReporter {
            intermediate, pruned_at, ..
        } = reporter;
        let mut record = TrialRecord {
            trial_id,
            params,
            intermediate,
            final_value: None,
            state: TrialState::Running,
            pruned_at,
            error: None,
        };
        match outcome {
            Err(e) => {
                record.state = TrialState::Failed;
                record.error = Some(e.to_string());
            }
            Ok(_) if pruned_at.is_some() => record.state = TrialState::Pruned,
            Ok(v) if !v.is_finite() => {
                record.state = TrialState::Failed;
                record.error = Some(format!("objective returned {v}"));
            }
            Ok(v) => {
                record.state = TrialState::Complete;
                record.final_value = Some(v);
            }
        }
        trials.push(record);
    }

    let best_trial = trials
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.final_value.filter(|_| t.state == TrialState::Complete).map(|v| (i, v)))
        .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
            Some((_, b)) if b >= v => acc,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
        .ok_or_else(|| {
            let failed = trials.iter().filter(|t| t.state == TrialState::Failed).count();
            let first = trials.iter().find_map(|t| t.error.clone()).unwrap_or_default();
            Error::Study(format!(
                "no trial completed ({failed} of {n_trials} failed; first error: {first})"
            ))
        })?;
    Ok(Study { trials, best_trial })
}
