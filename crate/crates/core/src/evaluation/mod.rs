//! Metrics, ROC-AUC, stratified folds, cross-validation and t-intervals.

mod auc;
mod cv;
mod folds;
mod interval;
mod metrics;

use std::fmt::Write as _;

pub use auc::roc_auc;
pub use cv::{cross_validate, cross_validate_with, CvResult, FoldOutcome};
pub use folds::{stratified_folds, FoldSplit};
pub use interval::{confidence_interval, IntervalEstimate, T_INTERVAL};
pub use metrics::{confusion, evaluate, f1, metrics, ConfusionCounts, MetricsReport};

/// One row per fold, then a `mean` row carrying the interval bounds.
pub fn cv_summary_csv(cv: &CvResult) -> String {
    let mut out = String::from("fold,best_epoch,macro_f1,accuracy,f1_pos,f1_neg,roc_auc,ci_low,ci_high,ci_method\n");
    for o in &cv.folds {
        let r = &o.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},,,",
            o.fold,
            o.best_epoch,
            r.macro_f1,
            r.accuracy,
            r.f1_pos,
            r.f1_neg,
            r.roc_auc.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    let ci = &cv.macro_f1;
    let _ = writeln!(
        out,
        "mean,,{},,,,,{},{},{}",
        ci.mean,
        ci.lower(),
        ci.upper(),
        ci.method
    );
    out
}
