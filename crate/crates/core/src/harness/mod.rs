//! Experiment orchestration: simulate, export, train the submit model and
//! every survey arm, evaluate, and write reports.
//!
//! Every stage is a plain function over a [`SeedLayout`], so the CLI can run
//! stages one at a time against persisted artifacts and produce the same
//! files as [`run_experiment`].

mod abtest;
mod config;
mod evaluate;
mod stages;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{write_csv, write_json, ReportRow};

pub use abtest::{abtest, abtest_file_name, write_abtest_csv, CONTROL_ARM};
pub use config::{
    AbTestConfig, ArmConfig, ExperimentConfig, ALL_METRICS, ARM_BASELINE, ARM_DEBIAS, ARM_LHUC, ARM_LHUC_SE,
    METRIC_AUC, METRIC_CALIBRATION, METRIC_RATES, METRIC_STRATA, METRIC_UAUC,
};
pub use evaluate::{evaluate, RATES_ARM, STRATUM_ALL};
pub use stages::{
    load_arm_model, load_submit_model, load_world, simulate, train_arm, train_submit_stage, SeedLayout,
    SimulationRecord, SIMULATION_FILE, SUBMIT_MODEL_FILE,
};

pub const AGGREGATE_CSV: &str = "report.csv";
pub const AGGREGATE_JSON: &str = "report.json";

pub fn seed_report_name(seed: u64) -> String {
    format!("report_seed{seed}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub per_seed: BTreeMap<u64, Vec<ReportRow>>,
    /// Mean over seeds of each cell; undefined where no seed defines it.
    pub aggregate: Vec<ReportRow>,
}

impl ExperimentReport {
    /// Aggregate value of one cell.
    pub fn value(&self, arm: &str, head: &str, metric: &str, stratum: &str) -> Option<f64> {
        find(&self.aggregate, arm, head, metric, stratum)
    }

    /// The cell's value for every seed, in seed order.
    pub fn seed_values(&self, arm: &str, head: &str, metric: &str, stratum: &str) -> Vec<Option<f64>> {
        self.per_seed.values().map(|rows| find(rows, arm, head, metric, stratum)).collect()
    }
}

fn find(rows: &[ReportRow], arm: &str, head: &str, metric: &str, stratum: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.arm == arm && r.head == head && r.metric == metric && r.stratum == stratum)
        .and_then(|r| r.value)
}

/// Runs every stage of one seed inside `layout`.
pub fn run_seed(config: &ExperimentConfig, seed: u64, layout: &SeedLayout) -> Result<Vec<ReportRow>> {
    simulate(config, seed, &layout.data_dir()).map_err(|e| e.in_stage("simulate"))?;
    train_submit_stage(config, seed, layout).map_err(|e| e.in_stage("train-submit"))?;
    for arm in &config.arms {
        train_arm(config, &arm.name, seed, layout).map_err(|e| e.in_stage("train"))?;
    }
    evaluate(config, layout).map_err(|e| e.in_stage("evaluate"))
}

/// Cell-wise mean over seeds, in the row order of the first seed.
pub fn aggregate(per_seed: &BTreeMap<u64, Vec<ReportRow>>) -> Vec<ReportRow> {
    let mut order: Vec<(String, String, String, String)> = Vec::new();
    let mut cells: BTreeMap<(String, String, String, String), (f64, usize, u64)> = BTreeMap::new();
    for rows in per_seed.values() {
        for r in rows {
            let key = (r.arm.clone(), r.head.clone(), r.metric.clone(), r.stratum.clone());
            let cell = cells.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (0.0, 0, 0)
            });
            if let Some(v) = r.value {
                cell.0 += v;
                cell.1 += 1;
            }
            cell.2 += r.n;
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (sum, defined, n) = cells[&key];
            let (arm, head, metric, stratum) = key;
            let mean = (defined > 0).then(|| sum / defined as f64);
            ReportRow::new(arm, head, metric, stratum, mean, n)
        })
        .collect()
}

pub fn write_reports(dir: &Path, report: &ExperimentReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let path = dir.join(name);
        Ok(BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?))
    };
    for (seed, rows) in &report.per_seed {
        write_csv(rows, create(&seed_report_name(*seed))?)?;
    }
    write_csv(&report.aggregate, create(AGGREGATE_CSV)?)?;
    write_json(&report.aggregate, create(AGGREGATE_JSON)?)
}

fn staging_dir(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "run".into());
    name.push(".partial");
    output.with_file_name(name)
}

/// Full pipeline for every seed. Artifacts are built in a sibling staging
/// directory that replaces `output_dir` only when every stage succeeded;
/// on failure it is removed and the error names the failing stage.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let output = &config.output_dir;
    let staging = staging_dir(output);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    let result = run_into(config, &staging);
    match result {
        Ok(report) => {
            if output.exists() {
                fs::remove_dir_all(output).map_err(|e| Error::io(output, e))?;
            }
            fs::rename(&staging, output).map_err(|e| Error::io(output, e))?;
            Ok(report)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

fn run_into(config: &ExperimentConfig, dir: &Path) -> Result<ExperimentReport> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join("experiment.toml");
    fs::write(&config_path, config.to_toml()?).map_err(|e| Error::io(&config_path, e))?;
    let mut per_seed = BTreeMap::new();
    for &seed in &config.seeds {
        let rows = run_seed(config, seed, &SeedLayout::for_seed(dir, seed))?;
        per_seed.insert(seed, rows);
    }
    let report = ExperimentReport {
        aggregate: aggregate(&per_seed),
        per_seed,
    };
    write_reports(dir, &report).map_err(|e| e.in_stage("report"))?;
    Ok(report)
}

#[cfg(test)]
mod tests;
