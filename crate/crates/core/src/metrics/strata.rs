use serde::{Deserialize, Serialize};

use super::auc::{auc, calibration, PredictionRecord};
use crate::error::{Error, Result};

/// Nearest-rank percentiles: for fraction `q` the value at sorted position
/// `ceil(q·n) − 1`.
pub fn quantile_thresholds(values: &[f64], fractions: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Undefined("quantiles of an empty set".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in quantile input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    fractions
        .iter()
        .map(|&q| {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidInput(format!("quantile fraction {q} outside (0, 1]")));
            }
            let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
            Ok(sorted[rank - 1])
        })
        .collect()
}

/// One propensity bucket `[lower, upper)`; the last bucket is closed.
/// `auc` / `calibration` are `None` when undefined on the bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    pub auc: Option<f64>,
    pub calibration: Option<f64>,
}

fn percentile_label(q: Option<f64>) -> String {
    match q {
        None => "0".into(),
        Some(q) => format!("P{}", (q * 100.0).round() as u32),
    }
}

/// Buckets records by the nearest-rank propensity quantiles at `fractions`
/// (e.g. `[0.25, 0.5, 0.75]` gives `[0,P25)`, `[P25,P50)`, `[P50,P75)`,
/// `[P75,P100]`) and reports AUC and calibration per bucket.
pub fn stratified_report(
    records: &[PredictionRecord],
    propensities: &[f64],
    fractions: &[f64],
) -> Result<Vec<Stratum>> {
    if records.len() != propensities.len() {
        return Err(Error::InvalidInput(format!(
            "{} records but {} propensities",
            records.len(),
            propensities.len()
        )));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("quantile fractions must increase".into()));
    }
    let edges = quantile_thresholds(propensities, fractions)?;
    let n_buckets = edges.len() + 1;
    let mut buckets: Vec<Vec<PredictionRecord>> = vec![Vec::new(); n_buckets];
    for (r, &p) in records.iter().zip(propensities) {
        let b = edges.iter().take_while(|&&e| p >= e).count();
        buckets[b].push(r.clone());
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(b, rows)| {
            let lower_q = (b > 0).then(|| fractions[b - 1]);
            let upper_q = fractions.get(b).copied().unwrap_or(1.0);
            let closing = if b + 1 == n_buckets { "]" } else { ")" };
            Stratum {
                label: format!(
                    "[{},{}{closing}",
                    percentile_label(lower_q),
                    percentile_label(Some(upper_q))
                ),
                lower: if b == 0 { f64::NEG_INFINITY } else { edges[b - 1] },
                upper: edges.get(b).copied().unwrap_or(f64::INFINITY),
                n: rows.len(),
                auc: auc(&rows).ok(),
                calibration: calibration(&rows).ok(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(p: f64, y: bool) -> PredictionRecord {
        PredictionRecord {
            user_id: 0,
            item_id: 0,
            head: "h".into(),
            p,
            y,
            ipw_weight: 1.0,
        }
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(quantile_thresholds(&v, &[0.25, 0.5, 1.0]).unwrap(), vec![3.0, 5.0, 10.0]);
        assert!(quantile_thresholds(&v, &[0.0]).is_err());
        assert!(quantile_thresholds(&[], &[0.5]).is_err());
    }

    #[test]
    fn uniform_propensities_fill_quarter_buckets() {
        let n = 1000;
        let props: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let records: Vec<PredictionRecord> = (0..n).map(|i| rec(0.5, i % 3 == 0)).collect();
        let strata = stratified_report(&records, &props, &[0.25, 0.5]).unwrap();
        assert_eq!(strata.len(), 3);
        assert_eq!(strata[0].label, "[0,P25)");
        assert_eq!(strata[1].label, "[P25,P50)");
        assert_eq!(strata[2].label, "[P50,P100]");
        assert_eq!(strata[0].n, 249);
        assert_eq!(strata[1].n, 250);
        assert_eq!(strata.iter().map(|s| s.n).sum::<usize>(), n);
    }

    #[test]
    fn undefined_buckets_do_not_abort() {
        let records = vec![rec(0.1, false), rec(0.2, false), rec(0.9, true), rec(0.8, false)];
        let props = vec![0.1, 0.1, 0.9, 0.9];
        let strata = stratified_report(&records, &props, &[0.5]).unwrap();
        // all propensities tie at the edges: everything lands in the upper bucket
        assert_eq!(strata[0].n, 0);
        assert_eq!(strata[0].auc, None);
        assert_eq!(strata[1].n, 4);
        assert!(strata[1].auc.is_some());
        let only_neg = stratified_report(&records[..2], &props[..2], &[0.5]).unwrap();
        assert_eq!(only_neg[1].auc, None);
        assert_eq!(only_neg[1].calibration, None);
    }
}
