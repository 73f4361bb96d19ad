//! Ranking-stage score fusion: `final_s = Σ wᵢ·pᵢ + other_s` over survey
//! heads, top-k selection, and offline replay of ranking arms against the
//! simulator oracle.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ItemFeatures, UserFeatures};
use crate::seed;
use crate::simulator::World;
use crate::survey_model::MultiHeadNet;

/// Anything that yields per-head probabilities for a (user, item) pair.
pub trait HeadScorer {
    fn head_names(&self) -> Vec<String>;
    fn score(&self, user: &UserFeatures, item: &ItemFeatures) -> Result<Vec<f64>>;
}

impl HeadScorer for MultiHeadNet {
    fn head_names(&self) -> Vec<String> {
        MultiHeadNet::head_names(self)
    }

    fn score(&self, user: &UserFeatures, item: &ItemFeatures) -> Result<Vec<f64>> {
        self.predict(&self.config().features.encode(user, item)?)
    }
}

/// Ground-truth answer probabilities from the simulator, under the same head
/// names as the survey model (`satisfaction` predicts a dislike).
pub struct OracleScorer<'a> {
    pub world: &'a World,
}

impl HeadScorer for OracleScorer<'_> {
    fn head_names(&self) -> Vec<String> {
        let mut names = vec!["satisfaction".to_string(), "inappropriate".to_string()];
        names.extend(self.world.config.issues.options.iter().cloned());
        names
    }

    fn score(&self, user: &UserFeatures, item: &ItemFeatures) -> Result<Vec<f64>> {
        let o = self
            .world
            .oracle(self.world.user(user.user_id)?, self.world.item(item.item_id)?);
        let mut p = vec![o.p_dislike, o.p_inappropriate];
        p.extend(o.p_issue);
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub item: ItemFeatures,
    /// Score from the rest of the ranking stack.
    pub other_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRequest {
    pub user: UserFeatures,
    pub candidates: Vec<Candidate>,
    /// Head name to weight.
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub item_id: u64,
    pub final_s: f64,
    pub p: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub k: usize,
    pub items: Vec<RankedItem>,
}

/// Body of a batch `rank` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRankRequest {
    pub k: usize,
    pub requests: Vec<RankRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRankResponse {
    pub results: Vec<RankResult>,
}

fn check_weights(weights: &BTreeMap<String, f64>) -> Result<()> {
    match weights.iter().find(|(_, w)| !w.is_finite()) {
        Some((h, w)) => Err(Error::InvalidInput(format!("weight of head `{h}` is not finite: {w}"))),
        None => Ok(()),
    }
}

/// `Σ w·p + other_s`. Heads with weight zero may lack a prediction.
pub fn final_score(p: &BTreeMap<String, f64>, weights: &BTreeMap<String, f64>, other_s: f64) -> Result<f64> {
    check_weights(weights)?;
    let mut total = other_s;
    for (head, &w) in weights {
        if w == 0.0 {
            continue;
        }
        let ph = p
            .get(head)
            .ok_or_else(|| Error::InvalidInput(format!("no prediction for weighted head `{head}`")))?;
        total += w * ph;
    }
    Ok(total)
}

/// Sorts by `final_s` descending, then item id ascending.
pub fn canonical_order(items: &mut [RankedItem]) {
    items.sort_by(|a, b| b.final_s.total_cmp(&a.final_s).then(a.item_id.cmp(&b.item_id)));
}

pub fn rank_top_k(request: &RankRequest, scorer: &dyn HeadScorer, k: usize) -> Result<RankResult> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if request.candidates.is_empty() {
        return Err(Error::InvalidInput("ranking request has no candidates".into()));
    }
    check_weights(&request.weights)?;
    let names = scorer.head_names();
    let mut items = request
        .candidates
        .iter()
        .map(|c| {
            let p: BTreeMap<String, f64> = names.iter().cloned().zip(scorer.score(&request.user, &c.item)?).collect();
            Ok(RankedItem {
                item_id: c.item.item_id,
                final_s: final_score(&p, &request.weights, c.other_s)?,
                p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    canonical_order(&mut items);
    items.truncate(k);
    Ok(RankResult { k, items })
}

pub fn rank_batch(batch: &BatchRankRequest, scorer: &dyn HeadScorer) -> Result<BatchRankResponse> {
    let results = batch
        .requests
        .iter()
        .map(|r| rank_top_k(r, scorer, batch.k))
        .collect::<Result<_>>()?;
    Ok(BatchRankResponse { results })
}

pub struct AbArm<'a> {
    pub name: String,
    pub scorer: &'a dyn HeadScorer,
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbEvalConfig {
    pub requests: usize,
    pub candidates: usize,
    pub k: usize,
}

/// Oracle expectations over an arm's top-k selections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    pub arm: String,
    pub selections: u64,
    /// Mean P(inappropriate answer) of selected items.
    pub inappropriate_rate: f64,
    /// Mean P(like answer).
    pub like_rate: f64,
    pub dislike_rate: f64,
    /// Mean engagement probabilities of report and dislike.
    pub report_engagement_rate: f64,
    pub dislike_engagement_rate: f64,
}

/// Replays the same seeded requests through every arm. Each request draws
/// a user and `candidates` distinct items; `other_s` is the simulator's
/// like-engagement logit. Outcomes are oracle expectations, not samples.
pub fn ab_rank_eval(world: &World, arms: &[AbArm], config: &AbEvalConfig, seed: u64) -> Result<Vec<ArmOutcome>> {
    if config.candidates == 0 || config.candidates > world.items.len() {
        return Err(Error::config(format!(
            "candidates per request must be in 1..={}",
            world.items.len()
        )));
    }
    let mut sums = vec![[0.0f64; 5]; arms.len()];
    let mut selections = vec![0u64; arms.len()];
    for r in 0..config.requests as u64 {
        let mut rng = seed::indexed_rng(seed, "ab-request", r);
        let user = &world.users[rng.random_range(0..world.users.len())];
        let mut items: Vec<usize> = sample(&mut rng, world.items.len(), config.candidates).into_vec();
        items.sort_unstable();
        let candidates = items
            .iter()
            .map(|&i| {
                let item = &world.items[i];
                Candidate {
                    item: world.item_features(item),
                    other_s: world.oracle(user, item).engagement_logits[0],
                }
            })
            .collect();
        let mut request = RankRequest {
            user: world.user_features(user),
            candidates,
            weights: BTreeMap::new(),
        };
        for (a, arm) in arms.iter().enumerate() {
            request.weights.clone_from(&arm.weights);
            for chosen in rank_top_k(&request, arm.scorer, config.k)?.items {
                let o = world.oracle(user, world.item(chosen.item_id)?);
                let e = o.engagement_probs();
                for (s, v) in sums[a].iter_mut().zip([o.p_inappropriate, o.p_like, o.p_dislike, e[3], e[2]]) {
                    *s += v;
                }
                selections[a] += 1;
            }
        }
    }
    Ok(arms
        .iter()
        .zip(sums.iter().zip(&selections))
        .map(|(arm, (s, &n))| {
            let mean = |v: f64| if n == 0 { 0.0 } else { v / n as f64 };
            ArmOutcome {
                arm: arm.name.clone(),
                selections: n,
                inappropriate_rate: mean(s[0]),
                like_rate: mean(s[1]),
                dislike_rate: mean(s[2]),
                report_engagement_rate: mean(s[3]),
                dislike_engagement_rate: mean(s[4]),
            }
        })
        .collect())
}
