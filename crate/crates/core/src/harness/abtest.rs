use std::collections::BTreeMap;
use std::io::Write;

use super::config::ExperimentConfig;
use super::stages::{load_arm_model, load_world, SeedLayout};
use crate::error::{Error, Result};
use crate::ranking::{ab_rank_eval, AbArm, AbEvalConfig, ArmOutcome, HeadScorer, OracleScorer};
use crate::seed;

/// Reference arm ranking on `other_s` alone.
pub const CONTROL_ARM: &str = "control";

pub fn abtest_file_name(seed: u64) -> String {
    format!("abtest_seed{seed}.csv")
}

/// Replays the same requests through a no-survey control and every listed
/// arm's trained model, all with the configured head weights.
pub fn abtest(config: &ExperimentConfig, layout: &SeedLayout, arms: &[String], seed: u64) -> Result<Vec<ArmOutcome>> {
    if arms.is_empty() {
        return Err(Error::InvalidInput("abtest needs at least one arm".into()));
    }
    let world = load_world(&layout.data_dir())?;
    let nets = arms
        .iter()
        .map(|name| {
            config.arm(name)?;
            load_arm_model(layout, name)
        })
        .collect::<Result<Vec<_>>>()?;
    let oracle = OracleScorer { world: &world };
    let mut ab_arms = vec![AbArm {
        name: CONTROL_ARM.into(),
        scorer: &oracle as &dyn HeadScorer,
        weights: BTreeMap::new(),
    }];
    ab_arms.extend(arms.iter().zip(&nets).map(|(name, net)| AbArm {
        name: name.clone(),
        scorer: net as &dyn HeadScorer,
        weights: config.abtest.weights.clone(),
    }));
    let ab = &config.abtest;
    let eval = AbEvalConfig {
        requests: ab.requests,
        candidates: ab.candidates,
        k: ab.k,
    };
    ab_rank_eval(&world, &ab_arms, &eval, seed::derive_seed(seed, "abtest"))
}

pub fn write_abtest_csv<W: Write>(outcomes: &[ArmOutcome], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for o in outcomes {
        w.serialize(o).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}
