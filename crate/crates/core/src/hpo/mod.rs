//! Hyperparameter search: a univariate Tree-structured Parzen Estimator,
//! the median pruner and a sequential study runner that maximizes.

mod space;
mod study;
mod tpe;

pub use space::{apply_params, ParamSpec, Params, SearchSpace};
pub use study::{optimize, should_prune, Study, TrialRecord, TrialReporter, TrialState, DEFAULT_PATIENCE};
pub use tpe::{suggest, TpeConfig};
