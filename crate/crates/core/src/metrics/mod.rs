//! Evaluation quantities: survey rates, AUC, calibration, per-user AUC over
//! implicit feedback, propensity-stratified breakdowns and report rows.
//!
//! Every function here is pure over immutable inputs.

mod auc;
mod rates;
mod report;
mod strata;
mod uauc;

pub use auc::{auc, auc_scores, calibration, calibration_scores, PredictionRecord};
pub use rates::{survey_issue_rate, survey_like_rate, SurveyTally};
pub use report::{read_csv, write_csv, write_json, ReportRow, UNDEFINED};
pub use strata::{quantile_thresholds, stratified_report, Stratum};
pub use uauc::{nfb_uauc, pfb_uauc, uauc, FeedbackRecord, TiePolicy, UaucSummary};
