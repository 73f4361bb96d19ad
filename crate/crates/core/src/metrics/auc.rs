use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One scored, labeled example of one head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub user_id: u64,
    pub item_id: u64,
    pub head: String,
    pub p: f64,
    pub y: bool,
    pub ipw_weight: f64,
}

/// Twice the number of (positive, negative) pairs ordered correctly, where a
/// tie counts `tie_credit2 / 2` (1 for the usual half credit, 0 for strict).
/// Returns `(count2, positives, negatives)`.
pub(crate) fn pair_count2(scores: &[f64], labels: &[bool], tie_credit2: u64) -> Result<(u64, u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut count2 = 0u64;
    let mut neg_below = 0u64;
    let mut positives = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        count2 += 2 * pos * neg_below + tie_credit2 * pos * neg;
        neg_below += neg;
        positives += pos;
        i = j;
    }
    Ok((count2, positives, neg_below))
}

/// Mann–Whitney AUC with ties counted one half.
pub fn auc_scores(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (count2, pos, neg) = pair_count2(scores, labels, 1)?;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("AUC needs both positive and negative labels".into()));
    }
    Ok(count2 as f64 / (2 * pos * neg) as f64)
}

pub fn auc(records: &[PredictionRecord]) -> Result<f64> {
    let scores: Vec<f64> = records.iter().map(|r| r.p).collect();
    let labels: Vec<bool> = records.iter().map(|r| r.y).collect();
    auc_scores(&scores, &labels)
}

/// `avg(p) / avg(y) − 1`.
pub fn calibration_scores(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Undefined("calibration needs a non-empty labeled set".into()));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 {
        return Err(Error::Undefined("calibration needs at least one positive label".into()));
    }
    let n = scores.len() as f64;
    let mean_p = scores.iter().sum::<f64>() / n;
    let mean_y = positives as f64 / n;
    Ok(mean_p / mean_y - 1.0)
}

pub fn calibration(records: &[PredictionRecord]) -> Result<f64> {
    let scores: Vec<f64> = records.iter().map(|r| r.p).collect();
    let labels: Vec<bool> = records.iter().map(|r| r.y).collect();
    calibration_scores(&scores, &labels)
}
