//! Debiased in-feed survey modeling.
//!
//! The crate bundles a small deterministic neural-network engine, the
//! multi-head survey model (with optional LHUC gating and squeeze-and-excitation
//! rescaling), a survey-submit propensity model with inverse-propensity
//! weighting, ranking-score fusion, evaluation metrics, a feed simulator with
//! known ground truth, and an experiment harness tying them together.

pub mod error;
pub mod features;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod ranking;
pub mod seed;
pub mod simulator;
pub mod submit_model;
pub mod survey;
pub mod survey_model;

pub use error::{Error, Result};
