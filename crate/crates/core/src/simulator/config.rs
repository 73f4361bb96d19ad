use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survey_model::DEFAULT_ISSUE_OPTIONS;

/// Satisfaction score `s = bias + match_scale·(1 + interaction·z)·match +
/// disposition_scale·z + item_scale·q − issue_penalty·(1 + issue_interaction·z)·issue`,
/// where `match` is the (attribute modulated) preference/item latent dot
/// product, `z` the user's disposition and `issue` the item's base issue
/// rate. Answers follow an ordinal logit with cutpoints `±cut`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SatisfactionModel {
    pub bias: f64,
    pub match_scale: f64,
    pub disposition_scale: f64,
    pub interaction: f64,
    pub item_scale: f64,
    pub issue_penalty: f64,
    pub issue_interaction: f64,
    pub cut: f64,
}

impl Default for SatisfactionModel {
    fn default() -> Self {
        Self {
            bias: 0.5,
            match_scale: 1.5,
            disposition_scale: 1.0,
            interaction: 0.0,
            item_scale: 0.5,
            issue_penalty: 1.0,
            issue_interaction: 0.0,
            cut: 0.75,
        }
    }
}

/// P(ans | ss) = σ(temperament + activity_effect·activity) with
/// temperament = offset + scale·(correlation·z + √(1−correlation²)·ε).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubmissionModel {
    pub offset: f64,
    pub scale: f64,
    /// Correlation between temperament and satisfaction disposition.
    pub correlation: f64,
    pub activity_effect: f64,
    /// Past shows summarized in the observable history submission count.
    pub history_window: u32,
}

impl Default for SubmissionModel {
    fn default() -> Self {
        Self {
            offset: -1.0,
            scale: 1.0,
            correlation: 0.0,
            activity_effect: 0.5,
            history_window: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IssueModel {
    pub options: Vec<String>,
    /// Share of authors who mostly post issue content.
    pub bad_author_rate: f64,
    pub bad_intensity: f64,
    pub clean_intensity: f64,
    /// Standard deviation of the users' log sensitivity.
    pub sensitivity_sd: f64,
    pub signal_noise: f64,
}

impl Default for IssueModel {
    fn default() -> Self {
        Self {
            options: DEFAULT_ISSUE_OPTIONS.iter().map(|s| s.to_string()).collect(),
            bad_author_rate: 0.15,
            bad_intensity: 0.8,
            clean_intensity: 0.01,
            sensitivity_sd: 0.5,
            signal_noise: 0.05,
        }
    }
}

/// Softmax over {none, like, dislike, report} with "none" as the zero logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngagementModel {
    pub like_bias: f64,
    pub like_scale: f64,
    pub dislike_bias: f64,
    pub dislike_scale: f64,
    pub dislike_issue: f64,
    pub report_bias: f64,
    pub report_issue: f64,
}

impl Default for EngagementModel {
    fn default() -> Self {
        Self {
            like_bias: -1.5,
            like_scale: 1.0,
            dislike_bias: -5.0,
            dislike_scale: 0.5,
            dislike_issue: 7.0,
            report_bias: -5.0,
            report_issue: 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub impressions_per_user: usize,
    pub survey_show_prob: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            impressions_per_user: 50,
            survey_show_prob: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub users: usize,
    pub items: usize,
    pub authors: usize,
    pub latent_dim: usize,
    /// Category weights of each observable attribute; codes are indices.
    pub languages: Vec<f64>,
    pub regions: Vec<f64>,
    pub devices: Vec<f64>,
    /// Strength with which user attributes rescale preference coordinates.
    pub attribute_modulation: f64,
    /// Noise on the observable preference and quality signals.
    pub signal_noise: f64,
    pub satisfaction: SatisfactionModel,
    pub submission: SubmissionModel,
    pub issues: IssueModel,
    pub engagement: EngagementModel,
    pub session: SessionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            users: 1000,
            items: 2000,
            authors: 200,
            latent_dim: 4,
            languages: vec![0.4, 0.3, 0.2, 0.1],
            regions: vec![0.25; 4],
            devices: vec![0.6, 0.4],
            attribute_modulation: 0.0,
            signal_noise: 0.5,
            satisfaction: SatisfactionModel::default(),
            submission: SubmissionModel::default(),
            issues: IssueModel::default(),
            engagement: EngagementModel::default(),
            session: SessionConfig::default(),
        }
    }
}

impl SimConfig {
    /// Low-disposition users submit more often, so raw survey rates are biased.
    pub fn confounded() -> Self {
        let mut c = Self::default();
        c.submission.correlation = -0.8;
        c.submission.scale = 1.5;
        c.satisfaction.interaction = 0.5;
        c
    }

    /// User attributes rescale the preference dimensions.
    pub fn modulated() -> Self {
        Self {
            attribute_modulation: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.items == 0 || self.authors == 0 {
            return Err(Error::config("users, items and authors must be at least 1"));
        }
        for (name, weights) in [
            ("languages", &self.languages),
            ("regions", &self.regions),
            ("devices", &self.devices),
        ] {
            if weights.is_empty()
                || weights.iter().any(|w| !w.is_finite() || *w < 0.0)
                || weights.iter().sum::<f64>() <= 0.0
            {
                return Err(Error::config(format!(
                    "{name} weights must be non-negative with a positive sum"
                )));
            }
        }
        let s = &self.satisfaction;
        if !(s.cut >= 0.0) {
            return Err(Error::config("satisfaction cut must be non-negative"));
        }
        let r = self.submission.correlation;
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::config(format!("temperament correlation {r} outside [-1, 1]")));
        }
        let i = &self.issues;
        if i.options.is_empty() {
            return Err(Error::config("at least one issue option is required"));
        }
        for (name, v) in [
            ("bad_author_rate", i.bad_author_rate),
            ("bad_intensity", i.bad_intensity),
            ("clean_intensity", i.clean_intensity),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("issues.{name} must be in [0, 1]")));
            }
        }
        let p = self.session.survey_show_prob;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config(format!("survey show probability {p} outside [0, 1]")));
        }
        let all = [
            self.attribute_modulation,
            self.signal_noise,
            s.bias,
            s.match_scale,
            s.disposition_scale,
            s.interaction,
            s.item_scale,
            s.issue_penalty,
            s.issue_interaction,
            self.submission.offset,
            self.submission.scale,
            self.submission.activity_effect,
            i.sensitivity_sd,
            i.signal_noise,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("simulator parameters must be finite"));
        }
        Ok(())
    }
}
