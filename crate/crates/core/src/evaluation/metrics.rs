use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::auc::roc_auc;
use crate::corpus::Lang;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// TP / (TP + FN), 0 when undefined.
    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// FP / (FP + TN), 0 when undefined.
    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    /// Counts with the roles of the two classes exchanged.
    pub fn swapped(&self) -> Self {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 = 2TP / (2TP + FP + FN), 0 when the denominator is 0.
pub fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

pub fn confusion(labels: &[u8], preds: &[u8]) -> Result<ConfusionCounts> {
    if labels.len() != preds.len() {
        return Err(Error::Shape(format!(
            "{} labels but {} predictions",
            labels.len(),
            preds.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("confusion needs at least one example"));
    }
    let mut c = ConfusionCounts::default();
    for (&y, &p) in labels.iter().zip(preds) {
        match (y == 1, p == 1) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub support: u64,
    pub accuracy: f64,
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub f1_pos: f64,
    pub precision_neg: f64,
    pub recall_neg: f64,
    pub f1_neg: f64,
    pub macro_f1: f64,
    /// Undefined (null) when the evaluated set holds a single class.
    pub roc_auc: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_language: BTreeMap<Lang, MetricsReport>,
}

/// Confusion-derived metrics. Ratios with a zero denominator are 0.
pub fn metrics(c: &ConfusionCounts) -> MetricsReport {
    let f1_pos = f1(c.tp, c.fp, c.fn_);
    let f1_neg = f1(c.tn, c.fn_, c.fp);
    MetricsReport {
        support: c.total(),
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision_pos: ratio(c.tp, c.tp + c.fp),
        recall_pos: ratio(c.tp, c.tp + c.fn_),
        f1_pos,
        precision_neg: ratio(c.tn, c.tn + c.fn_),
        recall_neg: ratio(c.tn, c.tn + c.fp),
        f1_neg,
        macro_f1: (f1_pos + f1_neg) / 2.0,
        roc_auc: None,
        per_language: BTreeMap::new(),
    }
}

/// Overall report plus one per language present in `langs`.
pub fn evaluate(labels: &[u8], scores: &[f64], preds: &[u8], langs: &[Lang]) -> Result<MetricsReport> {
    if scores.len() != labels.len() || langs.len() != labels.len() {
        return Err(Error::Shape("labels, scores, predictions and languages differ in length".into()));
    }
    let mut report = evaluate_flat(labels, scores, preds)?;
    for lang in Lang::ALL {
        let idx: Vec<usize> = (0..langs.len()).filter(|&i| langs[i] == lang).collect();
        if idx.is_empty() {
            continue;
        }
        let pick_u8 = |v: &[u8]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let sub = evaluate_flat(&pick_u8(labels), &s, &pick_u8(preds))?;
        report.per_language.insert(lang, sub);
    }
    Ok(report)
}

fn evaluate_flat(labels: &[u8], scores: &[f64], preds: &[u8]) -> Result<MetricsReport> {
    let mut report = metrics(&confusion(labels, preds)?);
    report.roc_auc = match roc_auc(labels, scores) {
        Ok(v) => Some(v),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(report)
}
