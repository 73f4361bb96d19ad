use serde::{Deserialize, Serialize};

use super::config::{HeadSpec, ANY_ISSUE};
use crate::error::{Error, Result};
use crate::survey::{SurveyKind, ANSWER_DISLIKE, ANSWER_LIKE, ANSWER_NEUTRAL};

/// Per-head training label; `None` means the head does not apply to the sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyLabelSet {
    pub labels: Vec<Option<bool>>,
}

impl SurveyLabelSet {
    /// Labels for a submitted survey. Only heads of the sample's own survey
    /// kind receive a label; a head is positive iff its option was selected
    /// (for the `any` option: iff any reason was selected).
    pub fn from_response(heads: &[HeadSpec], kind: SurveyKind, answers: &[String]) -> Result<Self> {
        if kind == SurveyKind::Satisfaction {
            match answers {
                [a] if [ANSWER_LIKE, ANSWER_NEUTRAL, ANSWER_DISLIKE].contains(&a.as_str()) => {}
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "satisfaction answers must be exactly one of like/neutral/dislike, got {answers:?}"
                    )))
                }
            }
        }
        let labels = heads
            .iter()
            .map(|h| {
                (h.kind == kind).then(|| {
                    if h.option == ANY_ISSUE {
                        !answers.is_empty()
                    } else {
                        answers.iter().any(|a| *a == h.option)
                    }
                })
            })
            .collect();
        Ok(Self { labels })
    }

    /// Submit-model labels: the head of the shown kind is positive iff the
    /// survey was submitted.
    pub fn from_submission(heads: &[HeadSpec], kind: SurveyKind, submitted: bool) -> Self {
        Self {
            labels: heads
                .iter()
                .map(|h| (h.kind == kind).then_some(submitted))
                .collect(),
        }
    }

    pub fn applicable(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survey_model::default_survey_heads;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn satisfaction_labels_only_satisfaction_head() {
        let heads = default_survey_heads();
        let neg = SurveyLabelSet::from_response(&heads, SurveyKind::Satisfaction, &s(&["like"])).unwrap();
        assert_eq!(neg.labels[0], Some(false));
        assert_eq!(neg.applicable(), 1);
        let pos =
            SurveyLabelSet::from_response(&heads, SurveyKind::Satisfaction, &s(&["dislike"])).unwrap();
        assert_eq!(pos.labels[0], Some(true));
        let neutral =
            SurveyLabelSet::from_response(&heads, SurveyKind::Satisfaction, &s(&["neutral"])).unwrap();
        assert_eq!(neutral.labels[0], Some(false));
        assert!(SurveyLabelSet::from_response(&heads, SurveyKind::Satisfaction, &s(&[])).is_err());
    }

    #[test]
    fn inappropriate_labels_follow_selected_options() {
        let heads = default_survey_heads();
        let l = SurveyLabelSet::from_response(&heads, SurveyKind::Inappropriate, &s(&["violent", "spam"]))
            .unwrap();
        assert_eq!(
            l.labels,
            vec![None, Some(true), Some(false), Some(true), Some(false), Some(true)]
        );
        let clean = SurveyLabelSet::from_response(&heads, SurveyKind::Inappropriate, &[]).unwrap();
        assert_eq!(clean.labels[1], Some(false));
        assert_eq!(clean.applicable(), 5);
    }
}
