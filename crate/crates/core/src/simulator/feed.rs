use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::world::{PairOracle, World};
use crate::error::{Error, Result};
use crate::seed;
use crate::survey::{Engagement, SurveyKind, ANSWER_DISLIKE, ANSWER_LIKE, ANSWER_NEUTRAL};

/// The observable survey outcome of an impression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub kind: SurveyKind,
    pub shown: bool,
    pub submitted: bool,
    pub answers: Vec<String>,
}

/// Oracle quantities of an impression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// P(ans | ss).
    pub p_ans_ss: f64,
    /// P(like | ans).
    pub p_like_ans: f64,
    /// P(like | ss), the product of the two above.
    pub p_like_ss: f64,
    pub p_dislike_ans: f64,
    pub p_inappropriate: f64,
    /// What the user would answer to the drawn survey kind if they submitted.
    pub latent_answers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpressionEvent {
    pub user_id: u64,
    pub impression_index: u32,
    pub item_id: u64,
    pub author_id: u64,
    pub engagement: Engagement,
    pub survey: SurveyRecord,
    pub truth: GroundTruth,
}

impl ImpressionEvent {
    pub fn validate(&self) -> Result<()> {
        let s = &self.survey;
        if s.submitted && !s.shown {
            return Err(Error::InvalidInput("submitted survey that was never shown".into()));
        }
        if !s.answers.is_empty() && !s.submitted {
            return Err(Error::InvalidInput("answers on an unsubmitted survey".into()));
        }
        let t = &self.truth;
        if t.p_like_ss != t.p_like_ans * t.p_ans_ss {
            return Err(Error::InvalidInput(format!(
                "P(like|ss) = {} differs from P(like|ans)·P(ans|ss) = {}",
                t.p_like_ss,
                t.p_like_ans * t.p_ans_ss
            )));
        }
        Ok(())
    }
}

/// Survey kind of an impression: a hash of (user, impression index), so
/// both kinds appear evenly and independently of everything else.
pub fn survey_kind_for(user_id: u64, impression_index: u32) -> SurveyKind {
    let h = seed::derive_indexed(user_id, "survey-kind", u64::from(impression_index));
    SurveyKind::ALL[(h % SurveyKind::ALL.len() as u64) as usize]
}

fn draw_engagement(oracle: &PairOracle, u: f64) -> Engagement {
    let p = oracle.engagement_probs();
    let outcomes = [Engagement::None, Engagement::Like, Engagement::Dislike, Engagement::Report];
    let mut acc = 0.0;
    for (o, pi) in outcomes.iter().zip(p) {
        acc += pi;
        if u < acc {
            return *o;
        }
    }
    Engagement::None
}

fn draw_answers(world: &World, oracle: &PairOracle, kind: SurveyKind, rng: &mut impl RngCore) -> Vec<String> {
    match kind {
        SurveyKind::Satisfaction => {
            let u: f64 = rng.random();
            let a = if u < oracle.p_like {
                ANSWER_LIKE
            } else if u < oracle.p_like + oracle.p_dislike {
                ANSWER_DISLIKE
            } else {
                ANSWER_NEUTRAL
            };
            vec![a.to_string()]
        }
        SurveyKind::Inappropriate => world
            .config
            .issues
            .options
            .iter()
            .zip(&oracle.p_issue)
            .filter_map(|(o, &p)| (rng.random::<f64>() < p).then(|| o.clone()))
            .collect(),
    }
}

/// Plays `session.impressions_per_user` impressions for every user, in
/// (user id, impression index) order. Each user has an independent stream
/// derived from `(seed, user id)`, and every impression consumes the same
/// random draws whether or not its survey is shown.
pub fn simulate_feed(world: &World, seed: u64) -> Result<Vec<ImpressionEvent>> {
    let session = &world.config.session;
    let mut events = Vec::with_capacity(world.users.len() * session.impressions_per_user);
    for user in &world.users {
        let mut rng = seed::indexed_rng(seed, "sim-feed", user.id);
        for j in 0..session.impressions_per_user as u32 {
            let item = &world.items[rng.random_range(0..world.items.len())];
            let oracle = world.oracle(user, item);
            let engagement = draw_engagement(&oracle, rng.random());
            let kind = survey_kind_for(user.id, j);
            let shown = rng.random::<f64>() < session.survey_show_prob;
            let submits = rng.random::<f64>() < oracle.p_submit;
            let latent_answers = draw_answers(world, &oracle, kind, &mut rng);
            let submitted = shown && submits;
            let event = ImpressionEvent {
                user_id: user.id,
                impression_index: j,
                item_id: item.id,
                author_id: item.author_id,
                engagement,
                survey: SurveyRecord {
                    kind,
                    shown,
                    submitted,
                    answers: if submitted { latent_answers.clone() } else { Vec::new() },
                },
                truth: GroundTruth {
                    p_ans_ss: oracle.p_submit,
                    p_like_ans: oracle.p_like,
                    p_like_ss: oracle.p_like * oracle.p_submit,
                    p_dislike_ans: oracle.p_dislike,
                    p_inappropriate: oracle.p_inappropriate,
                    latent_answers,
                },
            };
            events.push(event);
        }
    }
    Ok(events)
}
