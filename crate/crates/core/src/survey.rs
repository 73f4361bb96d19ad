//! Survey and engagement vocabulary shared by the simulator, models and metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ItemFeatures, UserFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurveyKind {
    /// "I like it" / "Neither like nor dislike it" / "I don't like it".
    Satisfaction,
    /// Suitability question followed by a multi-select list of reasons.
    Inappropriate,
}

impl SurveyKind {
    pub const ALL: [SurveyKind; 2] = [SurveyKind::Satisfaction, SurveyKind::Inappropriate];

    pub fn as_str(self) -> &'static str {
        match self {
            SurveyKind::Satisfaction => "satisfaction",
            SurveyKind::Inappropriate => "inappropriate",
        }
    }
}

impl fmt::Display for SurveyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurveyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "satisfaction" => Ok(SurveyKind::Satisfaction),
            "inappropriate" => Ok(SurveyKind::Inappropriate),
            other => Err(Error::unknown("survey kind", other)),
        }
    }
}

/// One survey show with the observable features of its impression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyShow {
    pub kind: SurveyKind,
    pub user: UserFeatures,
    pub item: ItemFeatures,
    pub submitted: bool,
    /// Selected options; empty unless submitted.
    pub answers: Vec<String>,
}

impl SurveyShow {
    pub fn validate(&self) -> Result<()> {
        if !self.submitted && !self.answers.is_empty() {
            return Err(Error::InvalidInput(format!(
                "show of item {} for user {} carries answers without a submission",
                self.item.item_id, self.user.user_id
            )));
        }
        Ok(())
    }
}

/// Answer strings used in satisfaction survey rows.
pub const ANSWER_LIKE: &str = "like";
pub const ANSWER_NEUTRAL: &str = "neutral";
pub const ANSWER_DISLIKE: &str = "dislike";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatisfactionAnswer {
    Like,
    Neutral,
    Dislike,
}

impl SatisfactionAnswer {
    pub fn as_str(self) -> &'static str {
        match self {
            SatisfactionAnswer::Like => ANSWER_LIKE,
            SatisfactionAnswer::Neutral => ANSWER_NEUTRAL,
            SatisfactionAnswer::Dislike => ANSWER_DISLIKE,
        }
    }
}

/// Implicit engagement recorded on an impression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engagement {
    None,
    Like,
    Share,
    Favorite,
    Dislike,
    Report,
}

impl Engagement {
    pub const NEGATIVE_FEEDBACK: [Engagement; 2] = [Engagement::Dislike, Engagement::Report];
    pub const POSITIVE_FEEDBACK: [Engagement; 3] =
        [Engagement::Like, Engagement::Share, Engagement::Favorite];
}
