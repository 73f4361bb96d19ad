//! The in-feed survey model: embeddings and a shared backbone with optional
//! LHUC gating and squeeze-and-excitation, feeding one sigmoid head per survey
//! option.

mod config;
mod dataset;
mod importance;
pub mod io;
mod labels;
mod net;
pub mod probe;
mod train;

pub use config::{
    default_lhuc_features, default_survey_heads, HeadSpec, ModelKind, SurveyModelConfig, ANY_ISSUE,
    DEFAULT_ISSUE_OPTIONS,
};
pub use dataset::survey_examples;
pub(crate) use dataset::survey_example;
pub use importance::{feature_importance, FeatureImportance};
pub use labels::SurveyLabelSet;
pub use net::{ForwardTrace, GateSource, MultiHeadNet, SeBlock, WeightedExample};
pub use train::{train, TrainConfig, TrainReport};

/// Builds a survey model (`model kind = survey`).
pub fn build(config: SurveyModelConfig, seed: u64) -> crate::Result<MultiHeadNet> {
    MultiHeadNet::build(ModelKind::Survey, config, seed)
}
