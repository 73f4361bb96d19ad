use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::features;
use crate::error::{Error, Result};
use crate::nn::OptimizerConfig;
use crate::simulator::SimConfig;
use crate::submit_model::SubmitModelConfig;
use crate::survey_model::{SurveyModelConfig, TrainConfig};

pub const ARM_BASELINE: &str = "baseline";
pub const ARM_LHUC: &str = "lhuc";
pub const ARM_LHUC_SE: &str = "lhuc_se";
pub const ARM_DEBIAS: &str = "debias";

pub const METRIC_AUC: &str = "auc";
pub const METRIC_CALIBRATION: &str = "calibration";
pub const METRIC_UAUC: &str = "uauc";
pub const METRIC_RATES: &str = "rates";
pub const METRIC_STRATA: &str = "strata";
pub const ALL_METRICS: [&str; 5] = [METRIC_AUC, METRIC_CALIBRATION, METRIC_UAUC, METRIC_RATES, METRIC_STRATA];

/// One experimental arm: a named survey model config, optionally trained
/// with inverse-propensity weights from the submit model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub name: String,
    pub model: String,
    #[serde(default)]
    pub debias: bool,
}

impl ArmConfig {
    pub fn new(name: &str, model: &str, debias: bool) -> Self {
        Self {
            name: name.into(),
            model: model.into(),
            debias,
        }
    }
}

/// Offline ranking replay used by the `abtest` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbTestConfig {
    pub requests: usize,
    pub candidates: usize,
    pub k: usize,
    /// Head weights applied to every arm; arms differ only in their models.
    pub weights: BTreeMap<String, f64>,
}

impl Default for AbTestConfig {
    fn default() -> Self {
        Self {
            requests: 2000,
            candidates: 50,
            k: 10,
            weights: [("inappropriate".to_string(), -5.0), ("satisfaction".to_string(), -1.0)]
                .into_iter()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub simulator: SimConfig,
    pub eval_fraction: f64,
    pub models: BTreeMap<String, SurveyModelConfig>,
    pub arms: Vec<ArmConfig>,
    pub submit: SubmitModelConfig,
    /// Survey-model training; the seed is replaced per experiment seed.
    pub training: TrainConfig,
    pub submit_training: TrainConfig,
    pub metrics: Vec<String>,
    /// Propensity quantiles bounding the strata.
    pub strata: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub abtest: AbTestConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut simulator = SimConfig::confounded();
        simulator.attribute_modulation = 1.0;
        simulator.satisfaction.match_scale = 3.0;
        simulator.signal_noise = 0.25;
        simulator.users = 4000;
        simulator.session.impressions_per_user = 100;
        simulator.session.survey_show_prob = 0.5;

        let desk = SurveyModelConfig {
            lhuc_features: [features::LANGUAGE, features::REGION, features::DEVICE]
                .map(String::from)
                .to_vec(),
            ..SurveyModelConfig::desk()
        };
        let models = [
            (ARM_BASELINE, desk.clone().baseline()),
            (ARM_LHUC, desk.clone().with_modules(true, false)),
            (ARM_LHUC_SE, desk.clone().with_modules(true, true)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let training = TrainConfig {
            epochs: 6,
            batch_size: 128,
            optimizer: OptimizerConfig::sgd(0.3),
            max_steps: None,
            final_lr_fraction: 0.05,
            seed: 0,
        };
        let submit_training = TrainConfig {
            epochs: 5,
            optimizer: OptimizerConfig::adam(2e-3),
            final_lr_fraction: 1.0,
            ..training.clone()
        };
        Self {
            simulator,
            eval_fraction: 0.2,
            models,
            arms: vec![
                ArmConfig::new(ARM_BASELINE, ARM_BASELINE, false),
                ArmConfig::new(ARM_LHUC, ARM_LHUC, false),
                ArmConfig::new(ARM_LHUC_SE, ARM_LHUC_SE, false),
                ArmConfig::new(ARM_DEBIAS, ARM_LHUC_SE, true),
            ],
            submit: SubmitModelConfig::desk(),
            submit_training,
            training,
            metrics: ALL_METRICS.iter().map(|s| s.to_string()).collect(),
            strata: vec![0.25, 0.5, 0.75],
            seeds: (1..=5).collect(),
            output_dir: PathBuf::from("runs/default"),
            abtest: AbTestConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML, falling back to JSON when the text is not valid TOML.
    /// Fields absent from the text keep their values from
    /// [`ExperimentConfig::default`], at any nesting depth.
    pub fn parse(text: &str) -> Result<Self> {
        let toml_err = match toml::from_str::<toml::Table>(text) {
            Ok(table) => {
                let mut base = toml::Table::try_from(Self::default()).map_err(|e| Error::Format(e.to_string()))?;
                merge_toml(&mut base, table);
                return base.try_into().map_err(|e: toml::de::Error| Error::Format(e.message().to_string()));
            }
            Err(e) => e,
        };
        let overlay: serde_json::Value = serde_json::from_str(text).map_err(|json_err| {
            Error::Format(format!(
                "experiment config is neither TOML ({}) nor JSON ({json_err})",
                toml_err.message()
            ))
        })?;
        let mut base = serde_json::to_value(Self::default())?;
        merge_json(&mut base, overlay);
        Ok(serde_json::from_value(base)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = Self::parse(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.simulator.validate()?;
        if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
            return Err(Error::config("eval_fraction must be strictly between 0 and 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.arms.is_empty() {
            return Err(Error::config("at least one arm is required"));
        }
        let mut names = std::collections::BTreeSet::new();
        for arm in &self.arms {
            if !names.insert(arm.name.as_str()) {
                return Err(Error::config(format!("duplicate arm `{}`", arm.name)));
            }
            if arm.name.is_empty() || !arm.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::config(format!("arm name `{}` must be [A-Za-z0-9_-]+", arm.name)));
            }
            let model = self
                .models
                .get(&arm.model)
                .ok_or_else(|| Error::config(format!("arm `{}` references undefined model `{}`", arm.name, arm.model)))?;
            self.check_schema(model)?;
        }
        self.submit.validate()?;
        self.check_schema(&self.submit.model_config())?;
        for m in &self.metrics {
            if !ALL_METRICS.contains(&m.as_str()) {
                return Err(Error::unknown("metric", m.clone()));
            }
        }
        if self.strata.windows(2).any(|w| w[0] >= w[1]) || self.strata.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return Err(Error::config("strata must be increasing fractions in (0, 1)"));
        }
        Ok(())
    }

    /// Feature schemas must fit the simulator's observable signals.
    fn check_schema(&self, model: &SurveyModelConfig) -> Result<()> {
        model.validate()?;
        let f = &model.features;
        let d = self.simulator.latent_dim;
        if f.pref_dim != d || f.quality_dim != d {
            return Err(Error::config(format!(
                "model signal dims ({}, {}) do not match simulator latent_dim {d}",
                f.pref_dim, f.quality_dim
            )));
        }
        if f.history_window != self.simulator.submission.history_window {
            return Err(Error::config("model history_window differs from the simulator's"));
        }
        Ok(())
    }

    pub fn arm(&self, name: &str) -> Result<&ArmConfig> {
        self.arms
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::unknown("arm", name))
    }

    pub fn wants(&self, metric: &str) -> bool {
        self.metrics.iter().any(|m| m == metric)
    }
}

fn merge_toml(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_toml(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn merge_json(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (key, value) in o {
                match b.get_mut(&key) {
                    Some(slot) => merge_json(slot, value),
                    None => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}
