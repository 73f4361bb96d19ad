//! Random inputs and parameter perturbation for gradient checks and
//! serialization probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MultiHeadNet, SurveyLabelSet, SurveyModelConfig, WeightedExample};
use crate::error::Result;
use crate::features::FeatureVector;
use crate::nn::{grad_check, GradCheckConfig, GradCheckReport, ParamSet};
use crate::survey::SurveyKind;

/// Buckets stay below 64 so small hash tables see repeated rows.
pub fn random_features<R: Rng + ?Sized>(config: &SurveyModelConfig, rng: &mut R) -> FeatureVector {
    FeatureVector {
        buckets: config
            .features
            .bucket_counts()
            .iter()
            .map(|&n| rng.random_range(0..n.min(64)))
            .collect(),
        numeric: (0..config.features.numeric_dim())
            .map(|_| rng.random_range(-1.5..1.5))
            .collect(),
    }
}

/// Alternating satisfaction and inappropriate examples with random labels
/// on the heads of their kind and random weights in `[0.5, 4)`.
pub fn random_batch(config: &SurveyModelConfig, n: usize, seed: u64) -> Vec<WeightedExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let kind = if i % 2 == 0 {
                SurveyKind::Satisfaction
            } else {
                SurveyKind::Inappropriate
            };
            let labels = SurveyLabelSet {
                labels: config
                    .heads
                    .iter()
                    .map(|h| (h.kind == kind).then(|| rng.random_bool(0.4)))
                    .collect(),
            };
            WeightedExample {
                features: random_features(config, &mut rng),
                labels,
                weight: rng.random_range(0.5..4.0),
            }
        })
        .collect()
}

/// Adds uniform noise in `(-scale, scale)` to every parameter, moving gates,
/// SE and embeddings off their initial values.
pub fn perturb(net: &mut MultiHeadNet, seed: u64, scale: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in net.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-scale..scale);
        }
    }
}

/// Grad-checks a freshly built, perturbed net on a random batch.
pub fn check_gradients(net: &MultiHeadNet, batch_size: usize, config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut net = net.clone();
    perturb(&mut net, 100 + config.seed, 0.05);
    let batch = random_batch(net.config(), batch_size, 200 + config.seed);
    grad_check(&net, &batch[..], config)
}
