//! The four-run composition behind the `reclaim` binary.
//!
//! RUN 1 and RUN 2 back-translate the corpus, search hyperparameters with
//! TPE over cross-validated macro-F1, retrain with the best parameters and
//! score every row out of fold. RUN 3 and RUN 4 reuse those scores verbatim
//! and only refit per-language decision thresholds. Every file carries the
//! seed and a sha256 of its inputs.

mod artifact;
mod config;
mod fixture;
mod report;
mod run;

pub use artifact::{
    read_artifact, write_artifact, CvSummary, InputHasher, PredictionRow, Provenance, RunArtifact, RunSummary,
    ScoreRow, Split,
};
pub use config::{PipelineConfig, RunId};
pub use fixture::write_fixture;
pub use report::{analyze, baseline, emit_report, label_distribution_csv, metric_table_csv};
pub use run::{execute_run, prepare, run_study, write_augmented, write_study, Prepared};
