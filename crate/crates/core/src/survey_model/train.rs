use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{MultiHeadNet, WeightedExample};
use crate::error::{Error, Result};
use crate::nn::{check_finite, zeroed, OptimizerConfig, OptimizerState, ParamSet};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Stop after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
    /// Learning rate at the last step as a fraction of the initial one.
    /// The rate decays linearly in between; 1.0 keeps it constant.
    pub final_lr_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 256,
            optimizer: OptimizerConfig::default(),
            max_steps: None,
            final_lr_fraction: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss of each (possibly partial) epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Mini-batch training with per-head masked, weight-normalized BCE.
/// Deterministic given the config seed and the order of `data`.
pub fn train(net: &mut MultiHeadNet, data: &[WeightedExample], config: &TrainConfig) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::config("batch_size and epochs must be positive"));
    }
    if !(0.0..=1.0).contains(&config.final_lr_fraction) {
        return Err(Error::config(format!(
            "final_lr_fraction must lie in [0, 1], got {}",
            config.final_lr_fraction
        )));
    }
    for (i, ex) in data.iter().enumerate() {
        if ex.labels.applicable() == 0 {
            return Err(Error::InvalidInput(format!("example {i} has no applicable head label")));
        }
        net.config().features.check(&ex.features)?;
    }
    let mut optimizer = OptimizerState::new(config.optimizer)?;
    let per_epoch = data.len().div_ceil(config.batch_size);
    let total_steps = config
        .max_steps
        .map_or(per_epoch * config.epochs, |m| m.min(per_epoch * config.epochs));
    let base_lr = config.optimizer.learning_rate;
    let step_lr = |step: usize| {
        if total_steps <= 1 {
            return base_lr;
        }
        let progress = step as f64 / (total_steps - 1) as f64;
        base_lr * (1.0 - (1.0 - config.final_lr_fraction) * progress)
    };
    let mut rng = seed::rng(config.seed, "train-shuffle");
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = zeroed(net);
    let mut batch: Vec<WeightedExample> = Vec::with_capacity(config.batch_size);
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(config.epochs),
        steps: 0,
    };

    'epochs: for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            if config.max_steps.is_some_and(|m| report.steps >= m) {
                if batches > 0 {
                    report.epoch_losses.push(loss_sum / batches as f64);
                }
                break 'epochs;
            }
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            for t in grads.tensors_mut() {
                t.fill(0.0);
            }
            let loss = net.batch_loss(&batch, Some(&mut grads))?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss {loss} at epoch {epoch}, step {}",
                    report.steps
                )));
            }
            check_finite(&grads, "gradient")?;
            optimizer.apply_update_with_lr(net, &grads, step_lr(report.steps))?;
            loss_sum += loss;
            batches += 1;
            report.steps += 1;
        }
        report.epoch_losses.push(loss_sum / batches as f64);
    }
    Ok(report)
}
