use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Unweighted binary cross-entropy of a single prediction.
#[inline]
pub fn bce_term(p: f64, y: f64) -> f64 {
    let p = clamp_probability(p);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// `Σ wᵢ·BCE(pᵢ, yᵢ) / Σ wᵢ`.
///
/// Predictions of exactly 0 or 1 are clamped rather than rejected.
pub fn weighted_bce_loss(predictions: &[f64], labels: &[f64], weights: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() || predictions.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} predictions, {} labels, {} weights",
            predictions.len(),
            labels.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for ((&p, &y), &w) in predictions.iter().zip(labels).zip(weights) {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidInput(format!("sample weight {w} is not positive")));
        }
        total += w * bce_term(p, y);
        weight_sum += w;
    }
    if weight_sum <= 0.0 {
        return Err(Error::InvalidInput("empty loss input".into()));
    }
    Ok(total / weight_sum)
}
