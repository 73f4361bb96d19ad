//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (bypassing output capture) before asserting.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use survey_lab::harness::{
    load_arm_model, run_experiment, seed_report_name, simulate, train_arm, ExperimentConfig, ExperimentReport,
    SeedLayout, AGGREGATE_CSV, AGGREGATE_JSON, ARM_BASELINE, ARM_DEBIAS, ARM_LHUC_SE, METRIC_AUC,
    METRIC_CALIBRATION, STRATUM_ALL,
};
use survey_lab::metrics::{auc_scores, survey_like_rate, uauc, PredictionRecord, SurveyTally, TiePolicy};
use survey_lab::nn::GradCheckConfig;
use survey_lab::ranking::{ab_rank_eval, AbArm, AbEvalConfig};
use survey_lab::simulator::{generate_population, simulate_feed, SessionConfig, SimConfig};
use survey_lab::submit_model::debiased_issue_rate;
use survey_lab::survey::{SurveyKind, ANSWER_DISLIKE, ANSWER_LIKE, ANSWER_NEUTRAL};
use survey_lab::survey_model::{self, io, probe, GateSource, SurveyModelConfig};

fn verdict(n: u32, name: &str, pass: bool, detail: impl std::fmt::Display) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {n:>2} {status} {name}: {detail}");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

#[test]
fn c01_gradient_check() {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (lhuc, se) in [(false, false), (true, false), (false, true), (true, true)] {
        let mut model = SurveyModelConfig::default().with_modules(lhuc, se);
        model.features.id_buckets = 64;
        for seed in 1..=3 {
            let net = survey_model::build(model.clone(), seed).unwrap();
            let cfg = GradCheckConfig {
                seed,
                ..GradCheckConfig::default()
            };
            let report = probe::check_gradients(&net, 8, &cfg).unwrap();
            worst = worst.max(report.max_rel_error);
            checked += report.checked;
        }
    }
    verdict(
        1,
        "gradient check",
        worst <= 1e-4,
        format!("max relative error {worst:.3e} over {checked} coordinates, 4 topologies x 3 seeds"),
    );
}

#[test]
fn c02_gating_identities() {
    let config = SurveyModelConfig::desk();
    let mut net = survey_model::build(config.clone(), 4).unwrap();
    probe::perturb(&mut net, 9, 0.3);
    let ungated = net.without_lhuc();
    let ones: Vec<Vec<f64>> = config.backbone_dims.iter().map(|&d| vec![1.0; d]).collect();

    let mut zero_se = net.clone();
    let se = zero_se.se_mut().unwrap();
    se.w1_mut().fill(0.0);
    se.w2_mut().fill(0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut gate_mismatch, mut se_mismatch) = (0, 0);
    for _ in 0..200 {
        let fv = probe::random_features(&config, &mut rng);
        if net.predict_with_gates(&fv, &ones).unwrap() != ungated.predict(&fv).unwrap() {
            gate_mismatch += 1;
        }
        let t = zero_se.forward_trace(&fv, &[], GateSource::Model).unwrap();
        let backbone_out = t.gated.last().unwrap();
        if t.representation.iter().zip(backbone_out).any(|(r, x)| *r != 0.5 * x) {
            se_mismatch += 1;
        }
    }
    verdict(
        2,
        "gating identities",
        gate_mismatch == 0 && se_mismatch == 0,
        format!("all-ones gate mismatches {gate_mismatch}/200, zero-SE mismatches {se_mismatch}/200"),
    );
}

/// Pairwise enumeration with ties worth `tie / 2`.
fn brute_auc(scores: &[f64], labels: &[bool], tie: u64) -> Option<f64> {
    let (mut count2, mut pos, mut neg) = (0u64, 0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li {
            pos += 1;
        } else {
            neg += 1;
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if !lj {
                count2 += if scores[i] > scores[j] {
                    2
                } else if scores[i] == scores[j] {
                    tie
                } else {
                    0
                };
            }
        }
    }
    (pos > 0 && neg > 0).then(|| count2 as f64 / (2 * pos * neg) as f64)
}

#[test]
fn c03_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=500);
        // Coarse scores force plenty of ties.
        let levels = rng.random_range(2..50) as f64;
        let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * levels).floor() / levels).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let users: Vec<u64> = (0..n).map(|_| rng.random_range(0..12)).collect();

        if brute_auc(&scores, &labels, 1) != auc_scores(&scores, &labels).ok() {
            mismatches += 1;
        }
        let records: Vec<PredictionRecord> = (0..n)
            .map(|i| PredictionRecord {
                user_id: users[i],
                item_id: i as u64,
                head: "satisfaction".into(),
                p: scores[i],
                y: labels[i],
                ipw_weight: 1.0,
            })
            .collect();
        for (policy, tie) in [(TiePolicy::Strict, 0), (TiePolicy::Half, 1)] {
            let mut per_user: BTreeMap<u64, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
            for i in 0..n {
                let e = per_user.entry(users[i]).or_default();
                e.0.push(scores[i]);
                e.1.push(labels[i]);
            }
            let values: Vec<f64> = per_user.values().filter_map(|(s, l)| brute_auc(s, l, tie)).collect();
            let expected = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
            if expected != uauc(&records, policy).ok().map(|u| u.value) {
                mismatches += 1;
            }
        }
    }
    verdict(
        3,
        "metric oracles",
        mismatches == 0,
        format!("{mismatches} mismatches against pair enumeration over 100 instances"),
    );
}

#[test]
fn c04_submission_identity() {
    let config = SimConfig {
        users: 1000,
        session: SessionConfig {
            impressions_per_user: 50,
            survey_show_prob: 0.5,
        },
        ..SimConfig::confounded()
    };
    let mut worst = 0.0f64;
    let mut events_checked = 0;
    for seed in 1..=3 {
        let world = generate_population(&config, seed).unwrap();
        for e in simulate_feed(&world, seed).unwrap() {
            let t = &e.truth;
            worst = worst.max((t.p_like_ss - t.p_like_ans * t.p_ans_ss).abs());
            events_checked += 1;
        }
    }
    verdict(
        4,
        "P(like|ss) = P(like|ans) P(ans|ss)",
        worst <= 1e-12,
        format!("max deviation {worst:.3e} over {events_checked} events"),
    );
}

#[test]
fn c05_ipw_unbiasedness() {
    let config = SimConfig {
        users: 2000,
        session: SessionConfig {
            impressions_per_user: 50,
            survey_show_prob: 1.0,
        },
        ..SimConfig::confounded()
    };
    let mut min_raw_gap = f64::INFINITY;
    let mut max_ipw_gap = 0.0f64;
    for seed in 1..=10 {
        let world = generate_population(&config, seed).unwrap();
        let events = simulate_feed(&world, seed).unwrap();
        assert_eq!(events.len(), 100_000);
        let mut tally = SurveyTally::new(SurveyKind::Satisfaction, &[ANSWER_LIKE, ANSWER_NEUTRAL, ANSWER_DISLIKE]);
        let mut population = 0.0;
        let mut shows = 0usize;
        let mut submits = Vec::new();
        for e in events.iter().filter(|e| e.survey.shown && e.survey.kind == SurveyKind::Satisfaction) {
            tally.record(e.survey.submitted, &e.survey.answers).unwrap();
            population += e.truth.p_like_ans;
            shows += 1;
            if e.survey.submitted {
                submits.push((e.survey.answers[0] == ANSWER_LIKE, e.truth.p_ans_ss));
            }
        }
        population /= shows as f64;
        let raw = survey_like_rate(&tally).unwrap();
        let ipw = debiased_issue_rate(&submits).unwrap();
        min_raw_gap = min_raw_gap.min((raw - population).abs());
        max_ipw_gap = max_ipw_gap.max((ipw - population).abs());
    }
    verdict(
        5,
        "IPW unbiasedness",
        min_raw_gap >= 0.05 && max_ipw_gap <= 0.02,
        format!("smallest raw gap {min_raw_gap:.4} (need >= 0.05), largest weighted gap {max_ipw_gap:.4} (need <= 0.02), 10 seeds x 100k impressions"),
    );
}

/// The default experiment over five seeds, shared by criteria 6 and 7.
fn default_report() -> &'static ExperimentReport {
    static REPORT: OnceLock<ExperimentReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            output_dir: dir.path().join("run"),
            ..ExperimentConfig::default()
        };
        assert_eq!(config.seeds.len(), 5);
        run_experiment(&config).unwrap()
    })
}

#[test]
fn c06_debias_ordering() {
    let report = default_report();
    let auc = |arm| report.value(arm, "satisfaction", METRIC_AUC, STRATUM_ALL).unwrap();
    let cal = |arm| report.value(arm, "satisfaction", METRIC_CALIBRATION, "[0,P25)").unwrap();
    let (auc_base, auc_debias) = (auc(ARM_BASELINE), auc(ARM_DEBIAS));
    let (cal_base, cal_debias) = (cal(ARM_BASELINE), cal(ARM_DEBIAS));
    verdict(
        6,
        "debias ordering",
        auc_debias >= auc_base && cal_debias.abs() <= cal_base.abs(),
        format!(
            "mean AUC debias {auc_debias:.4} vs baseline {auc_base:.4}; [0,P25) calibration debias {cal_debias:+.4} vs baseline {cal_base:+.4}"
        ),
    );
}

#[test]
fn c07_module_ordering() {
    let report = default_report();
    let auc = |arm| report.value(arm, "satisfaction", METRIC_AUC, STRATUM_ALL).unwrap();
    let (base, full) = (auc(ARM_BASELINE), auc(ARM_LHUC_SE));
    verdict(
        7,
        "module ordering",
        full >= base,
        format!("mean AUC lhuc_se {full:.4} vs baseline {base:.4} with attribute modulation 1.0"),
    );
}

#[test]
fn c08_ranking_effect() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::default();
    config.simulator.users = 1000;
    config.arms.retain(|a| a.name == ARM_BASELINE);
    let mut rates = Vec::new();
    for seed in 1..=5u64 {
        let layout = SeedLayout::for_seed(dir.path(), seed);
        simulate(&config, seed, &layout.data_dir()).unwrap();
        train_arm(&config, ARM_BASELINE, seed, &layout).unwrap();
        let net = load_arm_model(&layout, ARM_BASELINE).unwrap();
        let world = generate_population(&config.simulator, seed).unwrap();
        let arm = |name: &str, w: f64| AbArm {
            name: name.into(),
            scorer: &net,
            weights: [("inappropriate".to_string(), w)].into(),
        };
        let eval = AbEvalConfig {
            requests: 10_000,
            candidates: 50,
            k: 10,
        };
        let out = ab_rank_eval(&world, &[arm("off", 0.0), arm("on", -5.0)], &eval, seed).unwrap();
        rates.push((out[0].inappropriate_rate, out[1].inappropriate_rate));
    }
    let detail = rates
        .iter()
        .map(|(off, on)| format!("{off:.4}->{on:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        8,
        "ranking effect",
        rates.iter().all(|(off, on)| on < off),
        format!("inappropriate rate at w=0 -> w=-5 per seed: {detail}"),
    );
}

#[test]
fn c09_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::default();
    config.simulator.users = 300;
    config.training.epochs = 2;
    config.submit_training.epochs = 2;
    config.seeds = vec![1, 2];
    let mut files = vec![AGGREGATE_CSV.to_string(), AGGREGATE_JSON.to_string()];
    files.extend(config.seeds.iter().map(|&s| seed_report_name(s)));

    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        config.output_dir = dir.path().join(run);
        run_experiment(&config).unwrap();
        outputs.push(
            files
                .iter()
                .map(|f| std::fs::read(config.output_dir.join(f)).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    let differing: Vec<&String> = files
        .iter()
        .zip(outputs[0].iter().zip(&outputs[1]))
        .filter(|(_, (a, b))| a != b)
        .map(|(f, _)| f)
        .collect();
    verdict(
        9,
        "determinism",
        differing.is_empty(),
        format!("{} report files compared, differing: {differing:?}", files.len()),
    );
}

#[test]
fn c10_serialization() {
    let dir = tempfile::tempdir().unwrap();
    let config = SurveyModelConfig::desk();
    let mut net = survey_model::build(config.clone(), 8).unwrap();
    probe::perturb(&mut net, 8, 0.2);
    let path = dir.path().join("model.bin");
    io::save(&net, &path).unwrap();
    let loaded = io::load(&path).unwrap();
    let from_json = io::from_json(&io::to_json(&net).unwrap()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let fv = probe::random_features(&config, &mut rng);
        let expected = net.predict(&fv).unwrap();
        if loaded.predict(&fv).unwrap() != expected || from_json.predict(&fv).unwrap() != expected {
            mismatches += 1;
        }
    }
    verdict(
        10,
        "serialization",
        mismatches == 0,
        format!("{mismatches}/1000 inputs differ after binary and JSON round trips"),
    );
}
