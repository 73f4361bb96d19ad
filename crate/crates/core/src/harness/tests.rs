use super::*;

fn small_config(out: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    let sim = &mut config.simulator;
    sim.users = 120;
    sim.items = 300;
    sim.authors = 30;
    sim.session.impressions_per_user = 40;
    config.training.epochs = 1;
    config.submit_training.epochs = 1;
    config.seeds = vec![7];
    config.abtest.requests = 20;
    config.output_dir = out.to_path_buf();
    config
}

fn only_arm(config: &mut ExperimentConfig, arm: &str) {
    config.arms.retain(|a| a.name == arm);
}

#[test]
fn config_round_trips_through_toml_and_json() {
    let config = ExperimentConfig::default();
    let toml_text = config.to_toml().unwrap();
    assert_eq!(ExperimentConfig::parse(&toml_text).unwrap(), config);
    let json_text = serde_json::to_string(&config).unwrap();
    assert_eq!(ExperimentConfig::parse(&json_text).unwrap(), config);
}

#[test]
fn partial_config_fills_defaults() {
    let config = ExperimentConfig::parse("seeds = [3, 4]\neval_fraction = 0.3\n").unwrap();
    assert_eq!(config.seeds, vec![3, 4]);
    assert_eq!(config.eval_fraction, 0.3);
    assert_eq!(config.arms, ExperimentConfig::default().arms);
    config.validate().unwrap();
}

#[test]
fn nested_tables_merge_over_experiment_defaults() {
    let defaults = ExperimentConfig::default();
    let config = ExperimentConfig::parse("[simulator]\nusers = 500\n\n[training]\nepochs = 3\n").unwrap();
    assert_eq!(config.simulator.users, 500);
    assert_eq!(config.training.epochs, 3);
    assert_eq!(config.training.optimizer, defaults.training.optimizer);
    assert_eq!(config.training.final_lr_fraction, defaults.training.final_lr_fraction);
    assert_eq!(config.simulator.submission, defaults.simulator.submission);
    assert_eq!(config.simulator.attribute_modulation, defaults.simulator.attribute_modulation);

    let json = ExperimentConfig::parse(r#"{"simulator": {"users": 500}, "training": {"epochs": 3}}"#).unwrap();
    assert_eq!(json, config);
}

#[test]
fn garbage_config_is_a_format_error() {
    let err = ExperimentConfig::parse("seeds = [").unwrap_err();
    assert!(matches!(err, Error::Format(_)), "{err}");
}

#[test]
fn invalid_configs_are_rejected() {
    let base = ExperimentConfig::default();
    base.validate().unwrap();

    let mut c = base.clone();
    c.seeds.clear();
    assert!(c.validate().is_err());

    let mut c = base.clone();
    c.arms.push(c.arms[0].clone());
    assert!(c.validate().is_err());

    let mut c = base.clone();
    c.arms[0].model = "nonexistent".into();
    assert!(c.validate().is_err());

    let mut c = base.clone();
    c.metrics.push("accuracy".into());
    assert!(matches!(c.validate(), Err(Error::Unknown { .. })));

    let mut c = base.clone();
    c.strata = vec![0.5, 0.25];
    assert!(c.validate().is_err());

    let mut c = base.clone();
    c.simulator.latent_dim = 6;
    assert!(c.validate().is_err());

    let mut c = base;
    c.eval_fraction = 1.0;
    assert!(c.validate().is_err());
}

#[test]
fn single_arm_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut config = small_config(&out);
    only_arm(&mut config, ARM_BASELINE);
    let report = run_experiment(&config).unwrap();

    for name in [AGGREGATE_CSV, AGGREGATE_JSON, "experiment.toml", &seed_report_name(7)] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    assert!(!staging_dir(&out).exists());
    let auc = report.value(ARM_BASELINE, "satisfaction", METRIC_AUC, STRATUM_ALL).unwrap();
    assert!((0.0..=1.0).contains(&auc));
    assert!(report.value(RATES_ARM, "like", "population_rate", STRATUM_ALL).is_some());
    assert_eq!(report.per_seed.len(), 1);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(&dir.path().join("a"));
    only_arm(&mut config, ARM_DEBIAS);
    run_experiment(&config).unwrap();
    config.output_dir = dir.path().join("b");
    run_experiment(&config).unwrap();
    for name in [AGGREGATE_CSV, AGGREGATE_JSON, &seed_report_name(7)] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn debias_arm_needs_the_submit_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(&dir.path().join("run"));
    let layout = SeedLayout::new(dir.path().join("stages"));
    simulate(&config, 7, &layout.data_dir()).unwrap();
    let err = train_arm(&config, ARM_DEBIAS, 7, &layout).unwrap_err();
    assert!(matches!(err, Error::MissingDependency(_)), "{err}");

    train_submit_stage(&config, 7, &layout).unwrap();
    train_arm(&config, ARM_DEBIAS, 7, &layout).unwrap();
    load_arm_model(&layout, ARM_DEBIAS).unwrap();
}

#[test]
fn failed_stage_is_named_and_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut config = small_config(&out);
    only_arm(&mut config, ARM_BASELINE);
    // Nobody ever submits, so the submit model sees a single class.
    config.simulator.submission.offset = -60.0;
    let err = run_experiment(&config).unwrap_err();
    match &err {
        Error::Stage { stage, .. } => assert_eq!(*stage, "train-submit"),
        other => panic!("expected a stage error, got {other}"),
    }
    assert!(!out.exists());
    assert!(!staging_dir(&out).exists());
}

#[test]
fn failed_rerun_keeps_previous_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut config = small_config(&out);
    only_arm(&mut config, ARM_BASELINE);
    run_experiment(&config).unwrap();
    let before = fs::read(out.join(AGGREGATE_CSV)).unwrap();

    config.simulator.submission.offset = -60.0;
    run_experiment(&config).unwrap_err();
    assert_eq!(fs::read(out.join(AGGREGATE_CSV)).unwrap(), before);
}

#[test]
fn aggregate_skips_undefined_cells() {
    let row = |v: Option<f64>| ReportRow::new("a", "h", "m", "all", v, 10);
    let per_seed: BTreeMap<u64, Vec<ReportRow>> =
        [(1, vec![row(Some(0.2))]), (2, vec![row(None)]), (3, vec![row(Some(0.4))])].into();
    let agg = aggregate(&per_seed);
    assert_eq!(agg.len(), 1);
    assert!((agg[0].value.unwrap() - 0.3).abs() < 1e-12);
    assert_eq!(agg[0].n, 30);

    let none: BTreeMap<u64, Vec<ReportRow>> = [(1, vec![row(None)])].into();
    assert_eq!(aggregate(&none)[0].value, None);
}

#[test]
fn abtest_compares_arms_against_control() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(&dir.path().join("run"));
    only_arm(&mut config, ARM_BASELINE);
    let layout = SeedLayout::new(dir.path().join("stages"));
    simulate(&config, 7, &layout.data_dir()).unwrap();
    let arms = vec![ARM_BASELINE.to_string()];
    assert!(matches!(abtest(&config, &layout, &arms, 7), Err(Error::MissingDependency(_))));

    train_arm(&config, ARM_BASELINE, 7, &layout).unwrap();
    let out = abtest(&config, &layout, &arms, 7).unwrap();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].arm, CONTROL_ARM);
    assert_eq!(out[1].arm, ARM_BASELINE);
    assert_eq!(out[1].selections, (config.abtest.requests * config.abtest.k) as u64);
    assert_eq!(abtest(&config, &layout, &arms, 7).unwrap(), out);

    let mut csv_bytes = Vec::new();
    write_abtest_csv(&out, &mut csv_bytes).unwrap();
    let text = String::from_utf8(csv_bytes).unwrap();
    assert!(text.starts_with("arm,selections,inappropriate_rate"));
    assert_eq!(text.lines().count(), 3);

    assert!(abtest(&config, &layout, &["nope".to_string()], 7).is_err());
}
