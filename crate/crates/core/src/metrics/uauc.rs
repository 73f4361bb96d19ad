use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::auc::{pair_count2, PredictionRecord};
use crate::error::{Error, Result};
use crate::survey::Engagement;

/// How a tied (positive, negative) score pair is credited in per-user AUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// `I(pᵢ > pⱼ)`: ties earn nothing. A constant scorer gets 0, not 0.5.
    #[default]
    Strict,
    Half,
}

impl TiePolicy {
    fn credit2(self) -> u64 {
        match self {
            TiePolicy::Strict => 0,
            TiePolicy::Half => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UaucSummary {
    pub value: f64,
    /// Users with at least one positive and one negative record.
    pub users: usize,
}

/// Mean over users of the per-user AUC. Users lacking either class are
/// excluded from the average.
pub fn uauc(records: &[PredictionRecord], ties: TiePolicy) -> Result<UaucSummary> {
    let mut by_user: BTreeMap<u64, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for r in records {
        let e = by_user.entry(r.user_id).or_default();
        e.0.push(r.p);
        e.1.push(r.y);
    }
    let mut sum = 0.0;
    let mut users = 0usize;
    for (scores, labels) in by_user.values() {
        let (count2, pos, neg) = pair_count2(scores, labels, ties.credit2())?;
        if pos == 0 || neg == 0 {
            continue;
        }
        sum += count2 as f64 / (2 * pos * neg) as f64;
        users += 1;
    }
    if users == 0 {
        return Err(Error::Undefined("no user has both positive and negative feedback".into()));
    }
    Ok(UaucSummary {
        value: sum / users as f64,
        users,
    })
}

/// A scored impression with its implicit engagement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub user_id: u64,
    pub item_id: u64,
    pub score: f64,
    pub engagement: Engagement,
}

fn feedback_uauc(records: &[FeedbackRecord], positives: &[Engagement], ties: TiePolicy) -> Result<f64> {
    let labeled: Vec<PredictionRecord> = records
        .iter()
        .map(|r| PredictionRecord {
            user_id: r.user_id,
            item_id: r.item_id,
            head: String::new(),
            p: r.score,
            y: positives.contains(&r.engagement),
            ipw_weight: 1.0,
        })
        .collect();
    Ok(uauc(&labeled, ties)?.value)
}

/// Negative-feedback UAUC: positives are impressions whose engagement is in
/// `positives` (normally dislike or report).
pub fn nfb_uauc(records: &[FeedbackRecord], positives: &[Engagement], ties: TiePolicy) -> Result<f64> {
    feedback_uauc(records, positives, ties)
}

/// Positive-feedback UAUC: positives are likes, shares or favorites.
pub fn pfb_uauc(records: &[FeedbackRecord], positives: &[Engagement], ties: TiePolicy) -> Result<f64> {
    feedback_uauc(records, positives, ties)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fb(user: u64, score: f64, e: Engagement) -> FeedbackRecord {
        FeedbackRecord {
            user_id: user,
            item_id: 0,
            score,
            engagement: e,
        }
    }

    const NEG: [Engagement; 2] = Engagement::NEGATIVE_FEEDBACK;
    const POS: [Engagement; 3] = Engagement::POSITIVE_FEEDBACK;

    #[test]
    fn single_user_cases() {
        let r = [fb(1, 0.9, Engagement::Report), fb(1, 0.1, Engagement::None)];
        assert_eq!(nfb_uauc(&r, &NEG, TiePolicy::Strict).unwrap(), 1.0);
        let tied = [fb(1, 0.4, Engagement::Dislike), fb(1, 0.4, Engagement::None)];
        assert_eq!(nfb_uauc(&tied, &NEG, TiePolicy::Strict).unwrap(), 0.0);
        assert_eq!(nfb_uauc(&tied, &NEG, TiePolicy::Half).unwrap(), 0.5);
        let liked = [fb(3, 0.8, Engagement::Like), fb(3, 0.2, Engagement::Dislike)];
        assert_eq!(pfb_uauc(&liked, &POS, TiePolicy::Strict).unwrap(), 1.0);
    }

    #[test]
    fn averages_users_uniformly() {
        let r = [
            fb(1, 0.9, Engagement::Dislike),
            fb(1, 0.1, Engagement::None),
            // user 2: one correct and one incorrect pair
            fb(2, 0.5, Engagement::Report),
            fb(2, 0.3, Engagement::None),
            fb(2, 0.7, Engagement::None),
            // user 3 has no negative feedback and is excluded
            fb(3, 0.2, Engagement::None),
        ];
        assert_eq!(nfb_uauc(&r, &NEG, TiePolicy::Strict).unwrap(), 0.75);
    }

    #[test]
    fn no_qualifying_user() {
        let r = [fb(1, 0.9, Engagement::None), fb(2, 0.1, Engagement::Dislike)];
        assert!(matches!(nfb_uauc(&r, &NEG, TiePolicy::Strict), Err(Error::Undefined(_))));
    }

    #[test]
    fn random_scores_average_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let records: Vec<FeedbackRecord> = (0..2000u64)
            .flat_map(|u| {
                (0..20)
                    .map(|_| {
                        let e = if rng.random_bool(0.3) { Engagement::Like } else { Engagement::None };
                        fb(u, rng.random::<f64>(), e)
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let v = pfb_uauc(&records, &POS, TiePolicy::Strict).unwrap();
        assert!((v - 0.5).abs() < 0.03, "{v}");
    }

    fn per_user_brute_force(records: &[FeedbackRecord]) -> f64 {
        let users: std::collections::BTreeSet<u64> = records.iter().map(|r| r.user_id).collect();
        let mut total = 0.0;
        let mut n = 0;
        for u in users {
            let mine: Vec<&FeedbackRecord> = records.iter().filter(|r| r.user_id == u).collect();
            let (mut hit2, mut pairs) = (0u64, 0u64);
            for a in &mine {
                if !NEG.contains(&a.engagement) {
                    continue;
                }
                for b in &mine {
                    if NEG.contains(&b.engagement) {
                        continue;
                    }
                    pairs += 1;
                    if a.score > b.score {
                        hit2 += 2;
                    }
                }
            }
            if pairs > 0 {
                total += hit2 as f64 / (2 * pairs) as f64;
                n += 1;
            }
        }
        total / n as f64
    }

    proptest! {
        #[test]
        fn strict_uauc_matches_per_user_enumeration(
            data in prop::collection::vec((0u64..6, 0u16..1000, 0u8..3), 2..250)
        ) {
            let records: Vec<FeedbackRecord> = data
                .iter()
                .map(|&(u, s, e)| {
                    let e = match e { 0 => Engagement::Dislike, 1 => Engagement::Report, _ => Engagement::None };
                    fb(u, f64::from(s) / 1000.0, e)
                })
                .collect();
            match nfb_uauc(&records, &NEG, TiePolicy::Strict) {
                Ok(v) => prop_assert_eq!(v, per_user_brute_force(&records)),
                Err(Error::Undefined(_)) => {}
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }
}
