//! Individually runnable pipeline stages over a per-seed directory layout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::seed;
use crate::simulator::{
    export_dataset, generate_population, read_events, simulate_feed, survey_shows, ExportSummary, SimConfig,
    SplitConfig, World, TRAIN_FILE,
};
use crate::submit_model::{self, attach_ipw, train_submit};
use crate::survey_model::{self, io, ModelKind, MultiHeadNet, TrainReport};

pub const SIMULATION_FILE: &str = "simulation.json";
pub const SUBMIT_MODEL_FILE: &str = "submit.model";

/// Where one seed's artifacts live: `data/` for exported events and `models/`
/// for trained networks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedLayout {
    pub root: PathBuf,
}

impl SeedLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn for_seed(output_dir: &Path, seed: u64) -> Self {
        Self::new(output_dir.join(format!("seed_{seed}")))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn model_path(&self, arm: &str) -> PathBuf {
        self.models_dir().join(format!("{arm}.model"))
    }

    pub fn submit_model_path(&self) -> PathBuf {
        self.models_dir().join(SUBMIT_MODEL_FILE)
    }
}

/// The world definition stored next to exported data so later stages can
/// rebuild the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub seed: u64,
    pub config: SimConfig,
}

pub fn load_world(data_dir: &Path) -> Result<World> {
    let path = data_dir.join(SIMULATION_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let record: SimulationRecord = serde_json::from_str(&text)?;
    generate_population(&record.config, record.seed)
}

pub fn simulate(config: &ExperimentConfig, seed: u64, data_dir: &Path) -> Result<ExportSummary> {
    let world = generate_population(&config.simulator, seed)?;
    let events = simulate_feed(&world, seed)?;
    let split = SplitConfig {
        eval_fraction: config.eval_fraction,
        seed,
    };
    let summary = export_dataset(&world, &events, &split, data_dir)?;
    let record = SimulationRecord {
        seed,
        config: config.simulator.clone(),
    };
    let path = data_dir.join(SIMULATION_FILE);
    fs::write(&path, serde_json::to_string_pretty(&record)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

pub fn train_submit_stage(config: &ExperimentConfig, seed: u64, layout: &SeedLayout) -> Result<TrainReport> {
    let rows = read_events(&layout.data_dir().join(TRAIN_FILE))?;
    let shows = survey_shows(&rows);
    let mut net = submit_model::build(&config.submit, seed::derive_seed(seed, "submit-init"))?;
    let training = crate::survey_model::TrainConfig {
        seed: seed::derive_seed(seed, "submit-train"),
        ..config.submit_training.clone()
    };
    let report = train_submit(&mut net, &shows, &training)?;
    let path = layout.submit_model_path();
    create_parent(&path)?;
    io::save(&net, &path)?;
    Ok(report)
}

pub fn load_submit_model(layout: &SeedLayout) -> Result<MultiHeadNet> {
    let path = layout.submit_model_path();
    if !path.exists() {
        return Err(Error::MissingDependency(format!(
            "submit model {} not found; train the submit model first",
            path.display()
        )));
    }
    io::load_kind(&path, ModelKind::Submit)
}

pub fn train_arm(config: &ExperimentConfig, arm_name: &str, seed: u64, layout: &SeedLayout) -> Result<TrainReport> {
    let arm = config.arm(arm_name)?;
    let model_config = &config.models[&arm.model];
    // Load the dependency before touching data so a missing model fails fast.
    let submit = if arm.debias {
        Some(load_submit_model(layout)?)
    } else {
        None
    };
    let rows = read_events(&layout.data_dir().join(TRAIN_FILE))?;
    let shows = survey_shows(&rows);
    let examples = match &submit {
        Some(net) => attach_ipw(&shows, model_config, net, config.submit.clip_floor)?,
        None => survey_model::survey_examples(&shows, model_config)?,
    };
    // All arms share initialization and shuffling streams per seed.
    let mut net = survey_model::build(model_config.clone(), seed::derive_seed(seed, "survey-init"))?;
    let training = crate::survey_model::TrainConfig {
        seed: seed::derive_seed(seed, "survey-train"),
        ..config.training.clone()
    };
    let report = survey_model::train(&mut net, &examples, &training)?;
    let path = layout.model_path(&arm.name);
    create_parent(&path)?;
    io::save(&net, &path)?;
    Ok(report)
}

pub fn load_arm_model(layout: &SeedLayout, arm: &str) -> Result<MultiHeadNet> {
    let path = layout.model_path(arm);
    if !path.exists() {
        return Err(Error::MissingDependency(format!(
            "model for arm `{arm}` not found at {}",
            path.display()
        )));
    }
    io::load_kind(&path, ModelKind::Survey)
}
