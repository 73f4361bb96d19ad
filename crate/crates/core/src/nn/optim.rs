use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            ..Self::default()
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.kind == OptimizerKind::Adam
            && !((0.0..1.0).contains(&self.beta1)
                && (0.0..1.0).contains(&self.beta2)
                && self.epsilon > 0.0)
        {
            return Err(Error::config("adam betas must lie in [0, 1) and epsilon be positive"));
        }
        Ok(())
    }
}

/// Optimizer state. Adam moments are allocated on the first update and must
/// keep the parameter shapes from then on.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: OptimizerConfig,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn apply_update<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        self.apply_update_with_lr(params, grads, self.config.learning_rate)
    }

    /// Same as [`apply_update`](Self::apply_update) with the step size
    /// overridden, for schedules.
    pub fn apply_update_with_lr<P: ParamSet>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<()> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::config(format!("invalid step size {lr}")));
        }
        let grad_tensors = grads.tensors();
        let mut param_tensors = params.tensors_mut();
        if grad_tensors.len() != param_tensors.len() {
            return Err(Error::config("gradient and parameter tensor counts differ"));
        }
        for (p, g) in param_tensors.iter().zip(&grad_tensors) {
            if p.len() != g.data.len() {
                return Err(Error::config(format!("gradient shape mismatch in {}", g.name)));
            }
        }
        self.step += 1;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in param_tensors.iter_mut().zip(&grad_tensors) {
                    for (pv, gv) in p.iter_mut().zip(g.data) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.first_moment.is_empty() {
                    self.first_moment = grad_tensors.iter().map(|g| vec![0.0; g.data.len()]).collect();
                    self.second_moment = self.first_moment.clone();
                }
                if self.first_moment.len() != grad_tensors.len()
                    || self
                        .first_moment
                        .iter()
                        .zip(&grad_tensors)
                        .any(|(m, g)| m.len() != g.data.len())
                {
                    return Err(Error::config("adam moments do not match parameter shapes"));
                }
                let OptimizerConfig {
                    beta1,
                    beta2,
                    epsilon,
                    ..
                } = self.config;
                let t = self.step as i32;
                let bias1 = 1.0 - beta1.powi(t);
                let bias2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in param_tensors
                    .iter_mut()
                    .zip(&grad_tensors)
                    .zip(&mut self.first_moment)
                    .zip(&mut self.second_moment)
                {
                    for (((pv, &gv), mv), vv) in
                        p.iter_mut().zip(g.data).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        *mv = beta1 * *mv + (1.0 - beta1) * gv;
                        *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                        let m_hat = *mv / bias1;
                        let v_hat = *vv / bias2;
                        *pv -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
