//! Survey-submit propensity model and inverse-propensity weighting.
//!
//! The submit model shares the survey model's architecture but never uses
//! LHUC gating, adds the user's history submission count as a feature, and
//! has one head per survey kind predicting P(submit | shown).

mod estimate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSchema, FeatureVector};
use crate::survey::{SurveyKind, SurveyShow};
use crate::survey_model::{
    self, HeadSpec, ModelKind, MultiHeadNet, SurveyLabelSet, SurveyModelConfig, TrainConfig, TrainReport,
    WeightedExample,
};

pub use estimate::{debiased_issue_rate, horvitz_thompson_rate};

pub const DEFAULT_CLIP_FLOOR: f64 = 0.01;

/// Option tag of submit heads; the positive class is "the survey was submitted".
pub const SUBMITTED: &str = "submitted";

pub fn submit_head_name(kind: SurveyKind) -> String {
    format!("{}_submit", kind.as_str())
}

pub fn submit_heads() -> Vec<HeadSpec> {
    SurveyKind::ALL
        .iter()
        .map(|&k| HeadSpec::new(submit_head_name(k), k, SUBMITTED))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubmitModelConfig {
    /// Observable feature layout; the history count is always switched on.
    pub features: FeatureSchema,
    pub embedding_dim: usize,
    pub backbone_dims: Vec<usize>,
    pub head_dims: Vec<usize>,
    pub use_se: bool,
    pub se_reduction: usize,
    /// Lower bound applied to predicted propensities before inversion.
    pub clip_floor: f64,
}

impl Default for SubmitModelConfig {
    fn default() -> Self {
        Self::from_survey(&SurveyModelConfig::default())
    }
}

impl SubmitModelConfig {
    pub fn desk() -> Self {
        Self::from_survey(&SurveyModelConfig::desk())
    }

    /// Same layer shapes and schema as a survey model config.
    pub fn from_survey(survey: &SurveyModelConfig) -> Self {
        Self {
            features: survey.features.clone(),
            embedding_dim: survey.embedding_dim,
            backbone_dims: survey.backbone_dims.clone(),
            head_dims: survey.head_dims.clone(),
            use_se: survey.use_se,
            se_reduction: survey.se_reduction,
            clip_floor: DEFAULT_CLIP_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_clip_floor(self.clip_floor)?;
        self.model_config().validate()
    }

    /// The network config: submit heads, history feature on, LHUC off.
    pub fn model_config(&self) -> SurveyModelConfig {
        let mut features = self.features.clone();
        features.include_history = true;
        SurveyModelConfig {
            features,
            embedding_dim: self.embedding_dim,
            backbone_dims: self.backbone_dims.clone(),
            head_dims: self.head_dims.clone(),
            heads: submit_heads(),
            use_lhuc: false,
            use_se: self.use_se,
            se_reduction: self.se_reduction,
            lhuc_features: Vec::new(),
        }
    }
}

fn validate_clip_floor(floor: f64) -> Result<()> {
    if floor > 0.0 && floor <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("clip floor must be in (0, 1], got {floor}")))
    }
}

pub fn build(config: &SubmitModelConfig, seed: u64) -> Result<MultiHeadNet> {
    config.validate()?;
    MultiHeadNet::build(ModelKind::Submit, config.model_config(), seed)
}

fn check_submit_net(net: &MultiHeadNet) -> Result<()> {
    if net.kind() != ModelKind::Submit {
        return Err(Error::InvalidInput(format!(
            "expected a submit model, got a {} model",
            net.kind().as_str()
        )));
    }
    if net.config().use_lhuc {
        return Err(Error::config("submit models must not use LHUC"));
    }
    Ok(())
}

/// One unweighted example per show, labelled on the head of the show's kind.
pub fn submit_examples(shows: &[SurveyShow], config: &SurveyModelConfig) -> Result<Vec<WeightedExample>> {
    shows
        .iter()
        .map(|s| {
            s.validate()?;
            Ok(WeightedExample {
                features: config.features.encode(&s.user, &s.item)?,
                labels: SurveyLabelSet::from_submission(&config.heads, s.kind, s.submitted),
                weight: 1.0,
            })
        })
        .collect()
}

/// Trains every kind head with plain BCE on (shown, submitted) outcomes.
pub fn train_submit(net: &mut MultiHeadNet, shows: &[SurveyShow], config: &TrainConfig) -> Result<TrainReport> {
    check_submit_net(net)?;
    for head in &net.config().heads {
        let (mut pos, mut neg) = (0usize, 0usize);
        for s in shows.iter().filter(|s| s.kind == head.kind) {
            if s.submitted {
                pos += 1;
            } else {
                neg += 1;
            }
        }
        if pos == 0 || neg == 0 {
            return Err(Error::Training(format!(
                "submit labels for survey kind `{}` are single-class ({pos} submitted, {neg} not submitted)",
                head.kind
            )));
        }
    }
    let examples = submit_examples(shows, net.config())?;
    survey_model::train(net, &examples, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropensityRecord {
    pub kind: SurveyKind,
    /// Model estimate of P(ans | ss).
    pub predicted: f64,
    pub clipped: f64,
    pub ipw_weight: f64,
}

impl PropensityRecord {
    pub fn from_prediction(kind: SurveyKind, predicted: f64, clip_floor: f64) -> Result<Self> {
        validate_clip_floor(clip_floor)?;
        if !(0.0..=1.0).contains(&predicted) {
            return Err(Error::InvalidInput(format!(
                "propensity must be a probability, got {predicted}"
            )));
        }
        let clipped = predicted.max(clip_floor);
        Ok(Self {
            kind,
            predicted,
            clipped,
            ipw_weight: 1.0 / clipped,
        })
    }
}

pub fn propensity(
    net: &MultiHeadNet,
    features: &FeatureVector,
    kind: SurveyKind,
    clip_floor: f64,
) -> Result<PropensityRecord> {
    check_submit_net(net)?;
    let head = net
        .config()
        .heads
        .iter()
        .position(|h| h.kind == kind)
        .ok_or_else(|| Error::unknown("survey kind", kind.as_str()))?;
    let p = net.predict(features)?[head];
    PropensityRecord::from_prediction(kind, p, clip_floor)
}

/// Propensities of every show, in input order.
pub fn show_propensities(net: &MultiHeadNet, shows: &[SurveyShow], clip_floor: f64) -> Result<Vec<PropensityRecord>> {
    let schema = &net.config().features;
    shows
        .iter()
        .map(|s| propensity(net, &schema.encode(&s.user, &s.item)?, s.kind, clip_floor))
        .collect()
}

/// Survey-model examples from the submitted shows, each weighted by the
/// inverse of its clipped submit propensity.
pub fn attach_ipw(
    shows: &[SurveyShow],
    survey_config: &SurveyModelConfig,
    submit_net: &MultiHeadNet,
    clip_floor: f64,
) -> Result<Vec<WeightedExample>> {
    let submitted: Vec<SurveyShow> = shows.iter().filter(|s| s.submitted).cloned().collect();
    let props = show_propensities(submit_net, &submitted, clip_floor)?;
    submitted
        .iter()
        .zip(&props)
        .map(|(s, p)| survey_model::survey_example(s, survey_config, p.ipw_weight))
        .collect()
}

#[cfg(test)]
mod tests;
