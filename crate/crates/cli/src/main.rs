//! `survey-lab` command-line front end. Every subcommand runs one pipeline
//! stage against the artifacts under `<out>/seed_<N>`, the same layout the
//! full `run` command produces.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use survey_lab::harness::{
    self, abtest, abtest_file_name, evaluate, load_arm_model, seed_report_name, simulate, train_arm,
    train_submit_stage, write_abtest_csv, ExperimentConfig, SeedLayout,
};
use survey_lab::metrics::write_csv;
use survey_lab::nn::GradCheckConfig;
use survey_lab::ranking::{rank_batch, BatchRankRequest};
use survey_lab::simulator::{read_events, survey_shows, EVAL_FILE};
use survey_lab::survey_model::{self, feature_importance, probe, SurveyModelConfig};
use survey_lab::Error;

const SUBMIT_ARM: &str = "submit";

#[derive(Parser)]
#[command(name = "survey-lab", version, about = "Debiased in-feed survey modeling experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML, or JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root; seed artifacts live in `<out>/seed_<N>`.
    #[arg(long, global = true, env = "SURVEY_LAB_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage for every configured seed and write the reports.
    Run,
    /// Simulate a world and export train, eval and oracle files.
    Simulate {
        /// Write the data files here instead of `<out>/seed_<N>/data`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train the submit model (`--arm submit`) or one survey arm; all of them by default.
    Train {
        #[arg(long)]
        arm: Option<String>,
    },
    /// Evaluate every arm on the held-out users and write `report_seed<N>.csv`.
    Evaluate,
    /// Rank a JSON batch of requests with one arm's model.
    Rank {
        #[arg(long)]
        arm: String,
        #[arg(long)]
        input: PathBuf,
        /// Overrides the batch's k.
        #[arg(long)]
        k: Option<usize>,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Replay ranking requests through a no-survey control and the given arms.
    Abtest {
        #[arg(long, value_delimiter = ',', required = true)]
        arms: Vec<String>,
    },
    /// Masked-feature AUC drop of one head on the held-out users.
    FeatureImportance {
        #[arg(long)]
        arm: String,
        #[arg(long, default_value = "satisfaction")]
        head: String,
        /// Comma-separated feature names; every feature by default.
        #[arg(long, value_delimiter = ',')]
        features: Vec<String>,
    },
    /// Finite-difference gradient check of the four model topologies.
    GradCheck {
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lab(#[from] Error),
    #[error("gradient check failed: max relative error {0:e}")]
    GradCheck(f64),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lab(e) if is_missing_input(e) => 2,
            _ => 1,
        }
    }
}

fn is_missing_input(e: &Error) -> bool {
    match e {
        Error::MissingDependency(_) => true,
        Error::Io { source, .. } => source.kind() == io::ErrorKind::NotFound,
        Error::Stage { source, .. } => is_missing_input(source),
        _ => false,
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) if !path.is_file() => {
            return Err(CliError::Usage(format!("config file {} not found", path.display())))
        }
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn run(cli: Cli) -> CliResult<()> {
    let config = load_config(&cli.common)?;
    let seed = cli.common.seed;
    let layout = SeedLayout::for_seed(&config.output_dir, seed);
    match cli.command {
        Command::Run => {
            let report = harness::run_experiment(&config)?;
            println!(
                "wrote {} report rows for {} seed(s) to {}",
                report.aggregate.len(),
                report.per_seed.len(),
                config.output_dir.display()
            );
        }
        Command::Simulate { data } => {
            let dir = data.unwrap_or_else(|| layout.data_dir());
            let summary = simulate(&config, seed, &dir)?;
            println!("{}", serde_json::to_string(&summary).map_err(Error::from)?);
        }
        Command::Train { arm } => {
            let arms: Vec<String> = match arm {
                Some(a) => vec![a],
                None => std::iter::once(SUBMIT_ARM.to_string())
                    .chain(config.arms.iter().map(|a| a.name.clone()))
                    .collect(),
            };
            for arm in arms {
                let report = if arm == SUBMIT_ARM {
                    train_submit_stage(&config, seed, &layout)?
                } else {
                    config
                        .arm(&arm)
                        .map_err(|_| CliError::Usage(format!("unknown arm `{arm}`")))?;
                    train_arm(&config, &arm, seed, &layout)?
                };
                let last = report.epoch_losses.last().copied().unwrap_or(f64::NAN);
                println!("{arm}: {} steps, final epoch loss {last:.6}", report.steps);
            }
        }
        Command::Evaluate => {
            let rows = evaluate(&config, &layout)?;
            let path = config.output_dir.join(seed_report_name(seed));
            write_csv(&rows, create(&path)?)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
        }
        Command::Rank { arm, input, k, output } => {
            if !input.is_file() {
                return Err(CliError::Usage(format!("input file {} not found", input.display())));
            }
            let net = load_arm_model(&layout, &arm)?;
            let text = fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let mut batch: BatchRankRequest = serde_json::from_str(&text).map_err(Error::from)?;
            if let Some(k) = k {
                batch.k = k;
            }
            let response = rank_batch(&batch, &net)?;
            let json = serde_json::to_string_pretty(&response).map_err(Error::from)?;
            match output {
                Some(path) => writeln!(create(&path)?, "{json}").map_err(|e| Error::io(&path, e))?,
                None => println!("{json}"),
            }
        }
        Command::Abtest { arms } => {
            for arm in &arms {
                config
                    .arm(arm)
                    .map_err(|_| CliError::Usage(format!("unknown arm `{arm}`")))?;
            }
            let outcomes = abtest(&config, &layout, &arms, seed)?;
            let path = config.output_dir.join(abtest_file_name(seed));
            write_abtest_csv(&outcomes, create(&path)?)?;
            write_abtest_csv(&outcomes, io::stdout().lock())?;
        }
        Command::FeatureImportance { arm, head, features } => {
            let net = load_arm_model(&layout, &arm)?;
            let rows = read_events(&layout.data_dir().join(EVAL_FILE))?;
            let examples = survey_model::survey_examples(&survey_shows(&rows), net.config())?;
            let names: Vec<String> = if features.is_empty() {
                all_features(net.config())
            } else {
                features
            };
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            let result = feature_importance(&net, &examples, &names, &head)?;
            println!("feature,auc_full,auc_masked,delta_auc");
            for f in result {
                println!("{},{},{},{}", f.feature, f.auc_full, f.auc_masked, f.delta_auc);
            }
        }
        Command::GradCheck {
            seeds,
            batch,
            tolerance,
        } => {
            let mut worst = 0.0f64;
            for (lhuc, se) in [(false, false), (true, false), (false, true), (true, true)] {
                let model = grad_check_model().with_modules(lhuc, se);
                for s in 1..=seeds {
                    let net = survey_model::build(model.clone(), s)?;
                    let cfg = GradCheckConfig {
                        seed: s,
                        ..GradCheckConfig::default()
                    };
                    let report = probe::check_gradients(&net, batch, &cfg)?;
                    println!(
                        "lhuc={lhuc} se={se} seed={s}: max_rel_error={:e} checked={} skipped_kinks={}",
                        report.max_rel_error, report.checked, report.skipped_kinks
                    );
                    worst = worst.max(report.max_rel_error);
                }
            }
            if worst > tolerance {
                return Err(CliError::GradCheck(worst));
            }
        }
    }
    Ok(())
}

/// Default layer sizes with small hash tables.
fn grad_check_model() -> SurveyModelConfig {
    let mut model = SurveyModelConfig::default();
    model.features.id_buckets = 64;
    model
}

fn all_features(config: &SurveyModelConfig) -> Vec<String> {
    survey_lab::features::CATEGORICAL_FIELDS
        .iter()
        .copied()
        .chain(config.features.numeric_fields().into_iter().map(|(name, _)| name))
        .map(String::from)
        .collect()
}
