//! Experiment harness around `coinfer-core`: five CLI-driven protocols
//! (bias sweep, in-context sweep, changepoint rollout, discount-factor fit,
//! attention correlation) with deterministic seeding, replayable remote
//! predictors, and plot-ready CSV output.
//!
//! Every run writes one directory containing `config.json` (a snapshot
//! sufficient to reproduce the run), `results.csv` (tidy long format),
//! `summary.csv` (aggregates), `warnings.log`, and `run.json` (the full run
//! record with version and timing metadata).

pub mod attention;
pub mod config;
pub mod experiments;
pub mod provider;
pub mod run;

use std::process::ExitCode;

/// Process exit policy: 0 on success, 1 when any trial failed (the run still
/// completes and records the failures), 2 on configuration errors.
pub fn exit_code_for(result: &Result<run::RunRecord, CliError>) -> ExitCode {
    match result {
        Ok(record) if record.trial_errors.is_empty() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(CliError::Config(_)) => ExitCode::from(2),
        Err(_) => ExitCode::from(1),
    }
}

/// Harness-level errors.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid or inconsistent configuration; maps to exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Run-level failure after a valid configuration; maps to exit code 1.
    #[error("{0}")]
    Run(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
