use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use crate::error::{Error, Result};
use crate::features::{ItemFeatures, UserFeatures};
use crate::nn::sigmoid;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimUser {
    /// Equal to the user's index in the population.
    pub id: u64,
    pub preference: Vec<f64>,
    /// Satisfaction disposition `z`.
    pub disposition: f64,
    /// Log multiplier on the per-option issue hazard.
    pub issue_sensitivity: f64,
    pub activity: f64,
    pub temperament: f64,
    pub language: u32,
    pub region: u32,
    pub device: u32,
    pub pref_signal: Vec<f64>,
    pub history_submissions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimItem {
    /// Equal to the item's index in the population.
    pub id: u64,
    pub author_id: u64,
    pub latent: Vec<f64>,
    /// Unobserved item appeal `q`.
    pub appeal: f64,
    /// Per-option issue intensity, each in [0, 1].
    pub issue_intensity: Vec<f64>,
    pub quality_signal: Vec<f64>,
    pub issue_signal: f64,
}

/// Ground-truth response model of one (user, item) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOracle {
    pub score: f64,
    /// P(ans | ss).
    pub p_submit: f64,
    /// P(like | ans), P(dislike | ans) of the satisfaction survey.
    pub p_like: f64,
    pub p_dislike: f64,
    /// Probability of each issue option being selected, in config order.
    pub p_issue: Vec<f64>,
    /// Probability that at least one issue option is selected.
    pub p_inappropriate: f64,
    /// Engagement logits for like, dislike and report ("none" is 0).
    pub engagement_logits: [f64; 3],
}

impl PairOracle {
    /// Probabilities of none, like, dislike and report.
    pub fn engagement_probs(&self) -> [f64; 4] {
        let m = self.engagement_logits.iter().fold(0.0f64, |a, &b| a.max(b));
        let e = [
            (-m).exp(),
            (self.engagement_logits[0] - m).exp(),
            (self.engagement_logits[1] - m).exp(),
            (self.engagement_logits[2] - m).exp(),
        ];
        let z: f64 = e.iter().sum();
        e.map(|v| v / z)
    }
}

/// A generated population plus the hidden parameters that link attributes
/// to preferences.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub config: SimConfig,
    pub seed: u64,
    pub users: Vec<SimUser>,
    pub items: Vec<SimItem>,
    /// Per-attribute-value modulation vectors: languages, regions, devices.
    modulation: [Vec<Vec<f64>>; 3],
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn categorical(weights: &[f64], what: &str) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|e| Error::config(format!("{what} weights: {e}")))
}

/// Deterministic population for `(config, seed)`. Users and items are
/// generated from independent per-id streams.
pub fn generate_population(config: &SimConfig, seed: u64) -> Result<World> {
    config.validate()?;
    let d = config.latent_dim;
    let mut rng = seed::rng(seed, "sim-modulation");
    let scale = 1.0 / 3f64.sqrt();
    let mut table = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| normal_vec(&mut rng, d).into_iter().map(|v| v * scale).collect())
            .collect()
    };
    let modulation = [
        table(config.languages.len()),
        table(config.regions.len()),
        table(config.devices.len()),
    ];

    let languages = categorical(&config.languages, "language")?;
    let regions = categorical(&config.regions, "region")?;
    let devices = categorical(&config.devices, "device")?;
    let sub = &config.submission;
    let rho = sub.correlation;
    let users = (0..config.users as u64)
        .map(|id| {
            let mut rng = seed::indexed_rng(seed, "sim-user", id);
            let preference = normal_vec(&mut rng, d);
            let disposition: f64 = rng.sample(StandardNormal);
            let eps: f64 = rng.sample(StandardNormal);
            let temperament = sub.offset + sub.scale * (rho * disposition + (1.0 - rho * rho).sqrt() * eps);
            let activity: f64 = rng.sample(StandardNormal);
            let sens: f64 = rng.sample(StandardNormal);
            let language = languages.sample(&mut rng) as u32;
            let region = regions.sample(&mut rng) as u32;
            let device = devices.sample(&mut rng) as u32;
            let noise = normal_vec(&mut rng, d);
            let pref_signal = preference
                .iter()
                .zip(&noise)
                .map(|(u, n)| u + config.signal_noise * n)
                .collect();
            let p = sigmoid(temperament + sub.activity_effect * activity);
            let history = Binomial::new(u64::from(sub.history_window), p)
                .map_err(|e| Error::config(format!("history draw: {e}")))?
                .sample(&mut rng) as u32;
            Ok(SimUser {
                id,
                preference,
                disposition,
                issue_sensitivity: config.issues.sensitivity_sd * sens,
                activity,
                temperament,
                language,
                region,
                device,
                pref_signal,
                history_submissions: history,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let issues = &config.issues;
    let bad_authors: Vec<Option<usize>> = (0..config.authors as u64)
        .map(|a| {
            let mut rng = seed::indexed_rng(seed, "sim-author", a);
            rng.random_bool(issues.bad_author_rate)
                .then(|| rng.random_range(0..issues.options.len()))
        })
        .collect();
    let items = (0..config.items as u64)
        .map(|id| {
            let mut rng = seed::indexed_rng(seed, "sim-item", id);
            let author_id = rng.random_range(0..config.authors as u64);
            let latent = normal_vec(&mut rng, d);
            let appeal: f64 = rng.sample(StandardNormal);
            let issue_intensity: Vec<f64> = (0..issues.options.len())
                .map(|k| {
                    let jitter = rng.random_range(0.5..1.5);
                    let base = match bad_authors[author_id as usize] {
                        Some(dominant) if dominant == k => issues.bad_intensity,
                        _ => issues.clean_intensity,
                    };
                    (base * jitter).min(1.0)
                })
                .collect();
            let noise = normal_vec(&mut rng, d);
            let quality_signal = latent
                .iter()
                .zip(&noise)
                .map(|(v, n)| v + config.signal_noise * n)
                .collect();
            let issue_noise: f64 = rng.sample(StandardNormal);
            let issue_signal = base_issue_rate(&issue_intensity) + issues.signal_noise * issue_noise;
            SimItem {
                id,
                author_id,
                latent,
                appeal,
                issue_intensity,
                quality_signal,
                issue_signal,
            }
        })
        .collect();
    Ok(World {
        config: config.clone(),
        seed,
        users,
        items,
        modulation,
    })
}

/// Chance that at least one issue applies to an item for a user of unit sensitivity.
fn base_issue_rate(intensity: &[f64]) -> f64 {
    1.0 - intensity.iter().map(|i| 1.0 - i).product::<f64>()
}

impl World {
    pub fn user(&self, id: u64) -> Result<&SimUser> {
        self.users
            .get(id as usize)
            .ok_or_else(|| Error::unknown("user", id.to_string()))
    }

    pub fn item(&self, id: u64) -> Result<&SimItem> {
        self.items
            .get(id as usize)
            .ok_or_else(|| Error::unknown("item", id.to_string()))
    }

    /// Per-coordinate preference multipliers implied by the user's attributes.
    pub fn preference_scale(&self, user: &SimUser) -> Vec<f64> {
        let k = self.config.attribute_modulation;
        let [lang, region, device] = &self.modulation;
        (0..self.config.latent_dim)
            .map(|j| {
                (k * (lang[user.language as usize][j]
                    + region[user.region as usize][j]
                    + device[user.device as usize][j]))
                    .exp()
            })
            .collect()
    }

    /// True P(ans | ss) of a user; the same for every item and survey kind.
    pub fn submit_probability(&self, user: &SimUser) -> f64 {
        sigmoid(user.temperament + self.config.submission.activity_effect * user.activity)
    }

    pub fn oracle(&self, user: &SimUser, item: &SimItem) -> PairOracle {
        let c = &self.config;
        let s = &c.satisfaction;
        let d = c.latent_dim;
        let matched = if d == 0 {
            0.0
        } else {
            self.preference_scale(user)
                .iter()
                .zip(user.preference.iter().zip(&item.latent))
                .map(|(m, (u, v))| m * u * v)
                .sum::<f64>()
                / (d as f64).sqrt()
        };
        let base_issue = base_issue_rate(&item.issue_intensity);
        let score = s.bias
            + s.match_scale * (1.0 + s.interaction * user.disposition) * matched
            + s.disposition_scale * user.disposition
            + s.item_scale * item.appeal
            - s.issue_penalty * (1.0 + s.issue_interaction * user.disposition) * base_issue;
        let p_like = sigmoid(score - s.cut);
        let p_dislike = sigmoid(-score - s.cut);

        let exponent = user.issue_sensitivity.exp();
        let p_issue: Vec<f64> = item
            .issue_intensity
            .iter()
            .map(|i| 1.0 - (1.0 - i).powf(exponent))
            .collect();
        let p_inappropriate = 1.0 - p_issue.iter().map(|p| 1.0 - p).product::<f64>();

        let e = &c.engagement;
        PairOracle {
            score,
            p_submit: self.submit_probability(user),
            p_like,
            p_dislike,
            p_issue,
            p_inappropriate,
            engagement_logits: [
                e.like_bias + e.like_scale * score,
                e.dislike_bias - e.dislike_scale * score + e.dislike_issue * p_inappropriate,
                e.report_bias + e.report_issue * p_inappropriate,
            ],
        }
    }

    pub fn user_features(&self, user: &SimUser) -> UserFeatures {
        UserFeatures {
            user_id: user.id,
            language: user.language,
            region: user.region,
            device: user.device,
            activity: user.activity,
            pref_signal: user.pref_signal.clone(),
            history_submissions: user.history_submissions,
        }
    }

    pub fn item_features(&self, item: &SimItem) -> ItemFeatures {
        ItemFeatures {
            item_id: item.id,
            author_id: item.author_id,
            quality_signal: item.quality_signal.clone(),
            issue_signal: item.issue_signal,
        }
    }
}
