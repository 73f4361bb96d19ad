use serde::{Deserialize, Serialize};

use super::net::{MultiHeadNet, WeightedExample};
use crate::error::{Error, Result};
use crate::metrics::auc_scores;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub auc_full: f64,
    pub auc_masked: f64,
    /// `auc_full − auc_masked`; larger means more important.
    pub delta_auc: f64,
}

fn head_auc(
    net: &MultiHeadNet,
    examples: &[&WeightedExample],
    head: usize,
    masked: &[std::ops::Range<usize>],
) -> Result<f64> {
    let mut scores = Vec::with_capacity(examples.len());
    let mut labels = Vec::with_capacity(examples.len());
    for ex in examples {
        let y = ex.labels.labels[head].expect("filtered to labeled examples");
        scores.push(net.predict_masked(&ex.features, masked)?[head]);
        labels.push(y);
    }
    auc_scores(&scores, &labels)
}

/// Masking importance: each feature's dense-input slots are zeroed in every
/// example and the drop in `head`'s AUC is reported. Sorted by decreasing
/// drop, ties by feature name.
pub fn feature_importance(
    net: &MultiHeadNet,
    eval: &[WeightedExample],
    features: &[&str],
    head: &str,
) -> Result<Vec<FeatureImportance>> {
    let head_idx = net.config().head_index(head)?;
    let schema = &net.config().features;
    let d = net.config().embedding_dim;
    let slots = features
        .iter()
        .map(|f| schema.slots(f, d))
        .collect::<Result<Vec<_>>>()?;
    let labeled: Vec<&WeightedExample> = eval
        .iter()
        .filter(|e| e.labels.labels.get(head_idx).copied().flatten().is_some())
        .collect();
    if labeled.is_empty() {
        return Err(Error::Undefined(format!("no labeled examples for head {head}")));
    }
    let auc_full = head_auc(net, &labeled, head_idx, &[])?;
    let mut out = features
        .iter()
        .zip(slots)
        .map(|(f, r)| {
            let auc_masked = head_auc(net, &labeled, head_idx, &[r])?;
            Ok(FeatureImportance {
                feature: f.to_string(),
                auc_full,
                auc_masked,
                delta_auc: auc_full - auc_masked,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| {
        b.delta_auc
            .total_cmp(&a.delta_auc)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(out)
}
