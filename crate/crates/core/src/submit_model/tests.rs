use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::features::{ItemFeatures, UserFeatures};
use crate::metrics::auc_scores;
use crate::nn::OptimizerConfig;

fn config() -> SubmitModelConfig {
    SubmitModelConfig {
        features: FeatureSchema {
            id_buckets: 256,
            ..FeatureSchema::default()
        },
        ..SubmitModelConfig::desk()
    }
}

/// Shows whose submission probability is `p(activity)`; kinds alternate.
fn shows(n: usize, seed: u64, p: impl Fn(f64) -> f64) -> Vec<SurveyShow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let activity: f64 = rng.random_range(-2.0..2.0);
            let submitted = rng.random_bool(p(activity));
            SurveyShow {
                kind: SurveyKind::ALL[i % 2],
                user: UserFeatures {
                    user_id: rng.random_range(0..500),
                    language: rng.random_range(0..4),
                    region: rng.random_range(0..4),
                    device: rng.random_range(0..2),
                    activity,
                    pref_signal: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    history_submissions: 0,
                },
                item: ItemFeatures {
                    item_id: rng.random_range(0..2000),
                    author_id: rng.random_range(0..100),
                    quality_signal: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    issue_signal: rng.random_range(0.0..0.2),
                },
                submitted,
                answers: Vec::new(),
            }
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn train_cfg() -> TrainConfig {
    TrainConfig {
        epochs: 4,
        batch_size: 64,
        optimizer: OptimizerConfig::adam(3e-3),
        max_steps: None,
        final_lr_fraction: 1.0,
        seed: 1,
    }
}

fn held_out_auc(net: &MultiHeadNet, shows: &[SurveyShow]) -> (f64, Vec<f64>) {
    let props = show_propensities(net, shows, DEFAULT_CLIP_FLOOR).unwrap();
    let scores: Vec<f64> = props.iter().map(|p| p.predicted).collect();
    let labels: Vec<bool> = shows.iter().map(|s| s.submitted).collect();
    (auc_scores(&scores, &labels).unwrap(), scores)
}

#[test]
fn config_forces_submit_shape() {
    let c = SubmitModelConfig::default();
    let m = c.model_config();
    assert!(!m.use_lhuc);
    assert!(m.features.include_history);
    assert_eq!(m.head_names(), vec!["satisfaction_submit", "inappropriate_submit"]);
    let net = build(&c, 0).unwrap();
    assert_eq!(net.kind(), ModelKind::Submit);
    assert!(net.lhuc().is_none());
}

#[test]
fn learns_activity_driven_submission() {
    let train = shows(6000, 1, |a| sigmoid(2.0 * a));
    let eval = shows(2000, 2, |a| sigmoid(2.0 * a));
    let mut net = build(&config(), 3).unwrap();
    train_submit(&mut net, &train, &train_cfg()).unwrap();
    let (auc, _) = held_out_auc(&net, &eval);
    assert!(auc > 0.7, "held-out AUC {auc}");
}

#[test]
fn null_signal_concentrates_near_base_rate() {
    let train = shows(6000, 4, |_| 0.3);
    let eval = shows(2000, 5, |_| 0.3);
    let mut net = build(&config(), 6).unwrap();
    train_submit(&mut net, &train, &train_cfg()).unwrap();
    let (auc, scores) = held_out_auc(&net, &eval);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    assert!((auc - 0.5).abs() <= 0.05, "AUC {auc}");
    assert!((mean - 0.3).abs() < 0.05, "mean prediction {mean}");
}

#[test]
fn training_is_deterministic() {
    let data = shows(500, 7, |a| sigmoid(a));
    let mut a = build(&config(), 1).unwrap();
    let mut b = build(&config(), 1).unwrap();
    train_submit(&mut a, &data, &train_cfg()).unwrap();
    train_submit(&mut b, &data.clone(), &train_cfg()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_class_kind_is_named() {
    let mut data = shows(200, 8, |_| 0.5);
    for s in data.iter_mut().filter(|s| s.kind == SurveyKind::Inappropriate) {
        s.submitted = true;
    }
    let mut net = build(&config(), 1).unwrap();
    let err = train_submit(&mut net, &data, &train_cfg()).unwrap_err();
    assert!(err.to_string().contains("inappropriate"), "{err}");
}

#[test]
fn survey_model_is_rejected() {
    let mut net = crate::survey_model::build(SurveyModelConfig::desk(), 0).unwrap();
    assert!(train_submit(&mut net, &shows(10, 0, |_| 0.5), &train_cfg()).is_err());
}

#[test]
fn weight_arithmetic() {
    let k = SurveyKind::Satisfaction;
    assert_eq!(PropensityRecord::from_prediction(k, 0.25, 0.01).unwrap().ipw_weight, 4.0);
    let clipped = PropensityRecord::from_prediction(k, 0.001, 0.01).unwrap();
    assert_eq!(clipped.clipped, 0.01);
    assert_eq!(clipped.ipw_weight, 100.0);
    assert_eq!(PropensityRecord::from_prediction(k, 1.0, 0.01).unwrap().ipw_weight, 1.0);
    assert!(PropensityRecord::from_prediction(k, 1.2, 0.01).is_err());
    assert!(PropensityRecord::from_prediction(k, 0.5, 0.0).is_err());
}

#[test]
fn weights_never_exceed_inverse_floor() {
    let data = shows(300, 9, |a| sigmoid(3.0 * a));
    let mut net = build(&config(), 2).unwrap();
    // Push every prediction towards zero.
    for h in 0..2 {
        net.head_mut(h).layers_mut().last_mut().unwrap().bias_mut().fill(-30.0);
    }
    for floor in [0.01, 0.05, 0.2] {
        for p in show_propensities(&net, &data, floor).unwrap() {
            assert!(p.ipw_weight <= 1.0 / floor);
            assert_eq!(p.clipped, floor);
        }
    }
}

#[test]
fn constant_submit_model_gives_uniform_weights() {
    let mut data = shows(400, 10, |_| 0.5);
    for s in data.iter_mut().filter(|s| s.submitted) {
        s.answers = match s.kind {
            SurveyKind::Satisfaction => vec!["dislike".into()],
            SurveyKind::Inappropriate => vec![],
        };
    }
    let net = MultiHeadNet::zeros(ModelKind::Submit, config().model_config()).unwrap();
    let survey_config = SurveyModelConfig {
        features: config().features,
        ..SurveyModelConfig::desk()
    };
    let weighted = attach_ipw(&data, &survey_config, &net, DEFAULT_CLIP_FLOOR).unwrap();
    let plain = crate::survey_model::survey_examples(&data, &survey_config).unwrap();
    assert_eq!(weighted.len(), plain.len());
    assert!(weighted.iter().all(|e| e.weight == 2.0));
    for (w, p) in weighted.iter().zip(&plain) {
        assert_eq!((&w.features, &w.labels), (&p.features, &p.labels));
    }

    // Uniform weights train exactly like the unweighted baseline.
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let mut a = crate::survey_model::build(survey_config.clone(), 4).unwrap();
    let mut b = a.clone();
    crate::survey_model::train(&mut a, &weighted, &cfg).unwrap();
    crate::survey_model::train(&mut b, &plain, &cfg).unwrap();
    assert_eq!(a, b);
}
