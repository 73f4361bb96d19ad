use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{self, FeatureSchema};
use crate::survey::{SurveyKind, ANSWER_DISLIKE};

/// Option name of the inappropriate-kind head that fires when any reason is selected.
pub const ANY_ISSUE: &str = "any";

pub const DEFAULT_ISSUE_OPTIONS: [&str; 4] = ["sexual", "violent", "hateful", "spam"];

/// One output head: which survey kind trains it and which answer option it predicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    pub kind: SurveyKind,
    pub option: String,
}

impl HeadSpec {
    pub fn new(name: impl Into<String>, kind: SurveyKind, option: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind,
            option: option.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Survey,
    Submit,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Survey => "survey",
            ModelKind::Submit => "submit",
        }
    }
}

/// The survey heads predicting a "dislike" answer and each inappropriate reason.
pub fn default_survey_heads() -> Vec<HeadSpec> {
    let mut heads = vec![
        HeadSpec::new("satisfaction", SurveyKind::Satisfaction, ANSWER_DISLIKE),
        HeadSpec::new("inappropriate", SurveyKind::Inappropriate, ANY_ISSUE),
    ];
    heads.extend(
        DEFAULT_ISSUE_OPTIONS
            .iter()
            .map(|o| HeadSpec::new(*o, SurveyKind::Inappropriate, *o)),
    );
    heads
}

pub fn default_lhuc_features() -> Vec<String> {
    [
        features::USER_ID,
        features::ITEM_ID,
        features::AUTHOR_ID,
        features::LANGUAGE,
        features::REGION,
        features::DEVICE,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurveyModelConfig {
    pub features: FeatureSchema,
    pub embedding_dim: usize,
    pub backbone_dims: Vec<usize>,
    pub head_dims: Vec<usize>,
    pub heads: Vec<HeadSpec>,
    pub use_lhuc: bool,
    pub use_se: bool,
    pub se_reduction: usize,
    /// Dense-input features feeding the LHUC gate network.
    pub lhuc_features: Vec<String>,
}

impl Default for SurveyModelConfig {
    fn default() -> Self {
        Self {
            features: FeatureSchema::default(),
            embedding_dim: 16,
            backbone_dims: vec![512, 256, 128],
            head_dims: vec![64, 16, 1],
            heads: default_survey_heads(),
            use_lhuc: true,
            use_se: true,
            se_reduction: 4,
            lhuc_features: default_lhuc_features(),
        }
    }
}

impl SurveyModelConfig {
    /// Narrow layers and small hash tables for laptop-scale experiments.
    pub fn desk() -> Self {
        Self {
            features: FeatureSchema {
                id_buckets: 4096,
                ..FeatureSchema::default()
            },
            embedding_dim: 8,
            backbone_dims: vec![64, 32, 16],
            head_dims: vec![16, 8, 1],
            ..Self::default()
        }
    }

    pub fn baseline(mut self) -> Self {
        self.use_lhuc = false;
        self.use_se = false;
        self
    }

    pub fn with_modules(mut self, use_lhuc: bool, use_se: bool) -> Self {
        self.use_lhuc = use_lhuc;
        self.use_se = use_se;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.features.dense_dim(self.embedding_dim)
    }

    pub fn representation_dim(&self) -> usize {
        self.backbone_dims.last().copied().unwrap_or(0)
    }

    pub fn head_index(&self, name: &str) -> Result<usize> {
        self.heads
            .iter()
            .position(|h| h.name == name)
            .ok_or_else(|| Error::unknown("head", name))
    }

    pub fn head_names(&self) -> Vec<String> {
        self.heads.iter().map(|h| h.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if self.embedding_dim == 0 {
            return Err(Error::config("embedding_dim must be at least 1"));
        }
        if self.backbone_dims.is_empty() || self.backbone_dims.contains(&0) {
            return Err(Error::config("backbone dims must be non-empty and positive"));
        }
        if self.head_dims.last() != Some(&1) || self.head_dims.contains(&0) {
            return Err(Error::config("head dims must be positive and end in 1"));
        }
        if self.heads.is_empty() {
            return Err(Error::config("at least one head is required"));
        }
        let mut names = BTreeSet::new();
        for head in &self.heads {
            if !names.insert(head.name.as_str()) {
                return Err(Error::config(format!("duplicate head name `{}`", head.name)));
            }
        }
        if self.use_se {
            let c = self.representation_dim();
            if self.se_reduction == 0 || c / self.se_reduction == 0 || c % self.se_reduction != 0 {
                return Err(Error::config(format!(
                    "se_reduction {} must divide the representation dim {c}",
                    self.se_reduction
                )));
            }
        }
        if self.use_lhuc {
            if self.lhuc_features.is_empty() {
                return Err(Error::config("LHUC needs at least one input feature"));
            }
            for f in &self.lhuc_features {
                self.features.slots(f, self.embedding_dim)?;
            }
        }
        Ok(())
    }

    /// Dense-input slot ranges that feed the LHUC gate network.
    pub fn lhuc_slots(&self) -> Result<Vec<std::ops::Range<usize>>> {
        self.lhuc_features
            .iter()
            .map(|f| self.features.slots(f, self.embedding_dim))
            .collect()
    }
}
