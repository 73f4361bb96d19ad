//! Central finite-difference gradient checking.

use rand::seq::index::sample;

use super::params::ParamSet;
use crate::error::Result;
use crate::seed;

/// A model whose loss on a batch can be evaluated and differentiated.
pub trait Differentiable: ParamSet + Clone {
    type Batch: ?Sized;

    fn loss(&self, batch: &Self::Batch) -> Result<f64>;

    /// Loss and its gradient, returned as a parameter-shaped instance.
    fn loss_and_grad(&self, batch: &Self::Batch) -> Result<(f64, Self)>;

    /// Fingerprint of the piecewise-linear region (ReLU sign pattern) the batch
    /// falls in. Finite differences are only meaningful when a perturbation
    /// stays inside one region. Smooth models keep the default.
    fn region_signature(&self, _batch: &Self::Batch) -> Result<u64> {
        Ok(0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Coordinates probed per tensor.
    pub per_tensor: usize,
    /// Denominator floor of the relative error, so coordinates whose true
    /// gradient is ~0 are judged by absolute error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            per_tensor: 16,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<String>,
    pub checked: usize,
    /// Coordinates skipped because `±step` moved a ReLU across its kink.
    pub skipped_kinks: usize,
}

/// Compares `loss_and_grad` against `(L(θ+h) − L(θ−h)) / 2h` on a
/// deterministic subsample of coordinates and reports the worst relative error
/// `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
///
/// Within each tensor the probe prefers coordinates with a nonzero analytic
/// gradient, so sparse tensors (embedding tables) are exercised on rows the
/// batch actually touches.
pub fn grad_check<M: Differentiable>(
    model: &M,
    batch: &M::Batch,
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let (_, analytic) = model.loss_and_grad(batch)?;
    let base_signature = model.region_signature(batch)?;
    let mut rng = seed::rng(config.seed, "grad-check");

    let probes: Vec<(String, Vec<usize>)> = analytic
        .tensors()
        .iter()
        .map(|t| {
            let active: Vec<usize> = (0..t.data.len()).filter(|&i| t.data[i] != 0.0).collect();
            let pool: Vec<usize> = if active.is_empty() {
                (0..t.data.len()).collect()
            } else {
                active
            };
            let n = config.per_tensor.min(pool.len());
            let mut picked: Vec<usize> = sample(&mut rng, pool.len(), n)
                .into_iter()
                .map(|k| pool[k])
                .collect();
            picked.sort_unstable();
            (t.name.clone(), picked)
        })
        .collect();
    let analytic_values: Vec<Vec<f64>> = analytic
        .tensors()
        .iter()
        .zip(&probes)
        .map(|(t, (_, idx))| idx.iter().map(|&i| t.data[i]).collect())
        .collect();
    drop(analytic);

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped_kinks: 0,
    };
    let h = config.step;
    for (t, (name, indices)) in probes.iter().enumerate() {
        for (k, &i) in indices.iter().enumerate() {
            let original = probe.tensors_mut()[t][i];
            probe.tensors_mut()[t][i] = original + h;
            let plus = probe.loss(batch)?;
            let plus_sig = probe.region_signature(batch)?;
            probe.tensors_mut()[t][i] = original - h;
            let minus = probe.loss(batch)?;
            let minus_sig = probe.region_signature(batch)?;
            probe.tensors_mut()[t][i] = original;
            if plus_sig != base_signature || minus_sig != base_signature {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic_values[t][k];
            let denom = a.abs().max(numeric.abs()).max(config.floor);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some(format!("{name}[{i}]"));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::TensorRef;

    /// `L(w, b) = mean_i ½ (w·xᵢ + b − yᵢ)²`
    #[derive(Clone)]
    struct Linear {
        w: Vec<f64>,
        b: Vec<f64>,
    }

    impl ParamSet for Linear {
        fn tensors(&self) -> Vec<TensorRef<'_>> {
            vec![
                TensorRef {
                    name: "w".into(),
                    data: &self.w,
                },
                TensorRef {
                    name: "b".into(),
                    data: &self.b,
                },
            ]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.w, &mut self.b]
        }
    }

    impl Differentiable for Linear {
        type Batch = [(Vec<f64>, f64)];

        fn loss(&self, batch: &Self::Batch) -> Result<f64> {
            Ok(self.loss_and_grad(batch)?.0)
        }

        fn loss_and_grad(&self, batch: &Self::Batch) -> Result<(f64, Self)> {
            let n = batch.len() as f64;
            let mut g = Linear {
                w: vec![0.0; self.w.len()],
                b: vec![0.0],
            };
            let mut loss = 0.0;
            for (x, y) in batch {
                let r: f64 = self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b[0] - y;
                loss += 0.5 * r * r / n;
                for (gw, xv) in g.w.iter_mut().zip(x) {
                    *gw += r * xv / n;
                }
                g.b[0] += r / n;
            }
            Ok((loss, g))
        }
    }

    #[test]
    fn quadratic_loss_is_exact_up_to_roundoff() {
        let model = Linear {
            w: vec![0.3, -1.2, 2.0],
            b: vec![0.1],
        };
        let batch = vec![
            (vec![1.0, 2.0, -0.5], 0.7),
            (vec![-0.3, 0.4, 1.5], -1.0),
            (vec![2.2, -1.0, 0.0], 0.2),
        ];
        let report = grad_check(&model, &batch[..], &GradCheckConfig::default()).unwrap();
        assert_eq!(report.checked, 4);
        assert!(report.max_rel_error < 1e-8, "{report:?}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        #[derive(Clone)]
        struct Wrong(Linear);
        impl ParamSet for Wrong {
            fn tensors(&self) -> Vec<TensorRef<'_>> {
                self.0.tensors()
            }
            fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
                self.0.tensors_mut()
            }
        }
        impl Differentiable for Wrong {
            type Batch = [(Vec<f64>, f64)];
            fn loss(&self, batch: &Self::Batch) -> Result<f64> {
                self.0.loss(batch)
            }
            fn loss_and_grad(&self, batch: &Self::Batch) -> Result<(f64, Self)> {
                let (l, mut g) = self.0.loss_and_grad(batch)?;
                g.w[0] *= 1.01;
                Ok((l, Wrong(g)))
            }
        }
        let model = Wrong(Linear {
            w: vec![0.5, 0.5],
            b: vec![0.0],
        });
        let batch = vec![(vec![1.0, 1.0], 3.0)];
        let report = grad_check(&model, &batch[..], &GradCheckConfig::default()).unwrap();
        assert!(report.max_rel_error > 5e-3);
        assert_eq!(report.worst.as_deref(), Some("w[0]"));
    }
}
