use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survey::{SurveyKind, ANSWER_DISLIKE, ANSWER_LIKE, ANSWER_NEUTRAL};
use crate::survey_model::ANY_ISSUE;

/// Show/submit counts for one survey kind plus submits per answer option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyTally {
    pub kind: SurveyKind,
    pub shows: u64,
    pub submits: u64,
    pub option_counts: BTreeMap<String, u64>,
}

impl SurveyTally {
    /// Tally whose known options are `options` (satisfaction tallies always
    /// know like/neutral/dislike; inappropriate tallies always know `any`).
    pub fn new(kind: SurveyKind, options: &[&str]) -> Self {
        let mut option_counts: BTreeMap<String, u64> =
            options.iter().map(|o| (o.to_string(), 0)).collect();
        let implied: &[&str] = match kind {
            SurveyKind::Satisfaction => &[ANSWER_LIKE, ANSWER_NEUTRAL, ANSWER_DISLIKE],
            SurveyKind::Inappropriate => &[ANY_ISSUE],
        };
        for o in implied {
            option_counts.entry(o.to_string()).or_insert(0);
        }
        Self {
            kind,
            shows: 0,
            submits: 0,
            option_counts,
        }
    }

    pub fn record(&mut self, submitted: bool, answers: &[String]) -> Result<()> {
        self.shows += 1;
        if !submitted {
            return Ok(());
        }
        self.submits += 1;
        for a in answers {
            *self
                .option_counts
                .get_mut(a)
                .ok_or_else(|| Error::unknown("survey option", a))? += 1;
        }
        if self.kind == SurveyKind::Inappropriate && !answers.is_empty() {
            *self.option_counts.get_mut(ANY_ISSUE).expect("implied option") += 1;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.submits > self.shows {
            return Err(Error::InvalidInput("more submits than shows".into()));
        }
        if let Some((o, c)) = self.option_counts.iter().find(|(_, &c)| c > self.submits) {
            return Err(Error::InvalidInput(format!("option {o} counted {c} times in {} submits", self.submits)));
        }
        Ok(())
    }

    fn rate(&self, option: &str) -> Result<f64> {
        self.validate()?;
        let count = *self
            .option_counts
            .get(option)
            .ok_or_else(|| Error::unknown("survey option", option))?;
        if self.submits == 0 {
            return Err(Error::Undefined(format!("no {} survey submits", self.kind)));
        }
        Ok(count as f64 / self.submits as f64)
    }
}

/// Like submits over all submits.
pub fn survey_like_rate(tally: &SurveyTally) -> Result<f64> {
    tally.rate(ANSWER_LIKE)
}

/// Submits reporting `option` over all submits.
pub fn survey_issue_rate(tally: &SurveyTally, option: &str) -> Result<f64> {
    tally.rate(option)
}
