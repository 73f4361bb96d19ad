use super::config::SurveyModelConfig;
use super::labels::SurveyLabelSet;
use super::net::WeightedExample;
use crate::error::Result;
use crate::survey::SurveyShow;

/// Unit-weight training examples from the submitted shows; unsubmitted shows are skipped.
pub fn survey_examples(shows: &[SurveyShow], config: &SurveyModelConfig) -> Result<Vec<WeightedExample>> {
    shows
        .iter()
        .filter(|s| s.submitted)
        .map(|s| survey_example(s, config, 1.0))
        .collect()
}

pub(crate) fn survey_example(show: &SurveyShow, config: &SurveyModelConfig, weight: f64) -> Result<WeightedExample> {
    show.validate()?;
    Ok(WeightedExample {
        features: config.features.encode(&show.user, &show.item)?,
        labels: SurveyLabelSet::from_response(&config.heads, show.kind, &show.answers)?,
        weight,
    })
}
