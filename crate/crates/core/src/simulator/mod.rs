//! Synthetic feed world with known ground truth.
//!
//! Users carry latent tastes, a satisfaction disposition and a submission
//! temperament; items carry latent vectors and per-option issue intensities.
//! [`simulate_feed`] plays impressions, draws engagement, shows surveys and
//! records the oracle probabilities of each impression, which
//! [`export_dataset`] writes to a sidecar next to the observable rows.

mod config;
mod export;
mod feed;
mod world;

pub use config::{
    EngagementModel, IssueModel, SatisfactionModel, SessionConfig, SimConfig, SubmissionModel,
};
pub use export::{
    event_row, export_dataset, oracle, oracle_row, read_events, split_users, survey_shows, EventAttrs,
    EventRow, ExportSummary, OracleRow, SplitConfig, EVAL_FILE, ORACLE_FILE, TRAIN_FILE,
};
pub use feed::{simulate_feed, survey_kind_for, GroundTruth, ImpressionEvent, SurveyRecord};
pub use world::{generate_population, PairOracle, SimItem, SimUser, World};
