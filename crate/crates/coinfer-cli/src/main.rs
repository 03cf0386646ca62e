use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coinfer_cli::config::{Env, ExperimentConfig};
use coinfer_cli::run::RunRecord;
use coinfer_cli::{exit_code_for, experiments, CliError};

/// Sequential-prediction experiment runner: scores predictors against exact
/// Bayesian ground truth on coin-flip-style processes and emits plot-ready
/// CSV.
#[derive(Parser)]
#[command(name = "coinfer", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment configuration (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for the run record.
    #[arg(long, default_value = "run-out", global = true)]
    out: PathBuf,

    /// Predictor spec(s), e.g. "discounted_bayes:gamma=0.5"; overrides the
    /// config list when given.
    #[arg(long = "predictor", global = true)]
    predictors: Vec<String>,

    /// Remote provider endpoint (tcp://host:port or http://…).
    #[arg(long, global = true)]
    provider: Option<String>,

    /// Replay-cache path for remote predictors.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,

    /// Never touch the network; a cache miss becomes an error.
    #[arg(long, global = true)]
    replay_only: bool,
}

#[derive(Subcommand)]
enum Command {
    /// TVD against the expected biased distribution across the bias grid,
    /// aggregated over the prompt corpus.
    BiasSweep,
    /// TVD after n in-context examples, across the bias grid and example
    /// counts.
    IclSweep,
    /// Per-step rollout of predictions alongside classical and discounted
    /// filter means, optionally sweeping the switchover point.
    Changepoint,
    /// Best-fit discount factor per predictor, pooled over trajectories.
    GammaFit,
    /// Correlate externally extracted attention with point-estimate
    /// extremity under the exact posterior.
    AttentionCorr,
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::BiasSweep => "bias_sweep",
            Command::IclSweep => "icl_sweep",
            Command::Changepoint => "changepoint",
            Command::GammaFit => "gamma_fit",
            Command::AttentionCorr => "attention_corr",
        }
    }
}

fn execute(cli: &Cli) -> Result<RunRecord, CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if !cli.predictors.is_empty() {
        config.predictors = cli.predictors.clone();
    }
    if cli.provider.is_some() {
        config.provider = cli.provider.clone();
    }
    if cli.cache.is_some() {
        config.cache = cli.cache.clone();
    }
    if cli.replay_only {
        config.replay_only = true;
    }

    let env = Env::build(config)?;
    let record = experiments::run(cli.command.kind(), &env)?;
    record.write(&cli.out)?;
    Ok(record)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli);
    match &result {
        Ok(record) => {
            eprintln!(
                "{}: {} rows, {} summaries, {} warnings, {} trial errors -> {}",
                record.experiment,
                record.rows.len(),
                record.summaries.len(),
                record.warnings.len(),
                record.trial_errors.len(),
                cli.out.display()
            );
            for err in record.trial_errors.iter().take(5) {
                eprintln!("  trial error: {err}");
            }
            if record.trial_errors.len() > 5 {
                eprintln!("  … {} more in warnings.log", record.trial_errors.len() - 5);
            }
        }
        Err(e) => eprintln!("coinfer: {e}"),
    }
    exit_code_for(&result)
}
