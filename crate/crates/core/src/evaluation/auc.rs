use crate::error::{Error, Result};

/// ROC-AUC as the Mann-Whitney statistic with average ranks for ties.
///
/// Equals `(#{s_pos > s_neg} + 0.5 #{s_pos == s_neg}) / (P N)` exactly: the
/// numerator is accumulated in doubled integer ranks.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::Shape(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(
            "ROC-AUC needs at least one positive and one negative".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum over positives of 2 * (1-based average rank)
    let mut doubled_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let doubled_rank = (i + 1 + j) as u64;
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        doubled_rank_sum += tied_pos * doubled_rank;
        i = j;
    }
    let doubled_u = doubled_rank_sum - pos * (pos + 1);
    Ok((doubled_u as f64 / 2.0) / (pos * neg) as f64)
}
