//! The five experiment protocols. Each takes a resolved [`Env`] and returns
//! a [`RunRecord`]; trials are independent work items executed on a bounded
//! worker pool, aggregated in trial order so results never depend on
//! completion order.

pub mod attention_corr;
pub mod bias;
pub mod changepoint;
pub mod gamma;
pub mod icl;

pub use attention_corr::run_attention_corr;
pub use bias::run_bias_sweep;
pub use changepoint::run_changepoint;
pub use gamma::run_gamma_fit;
pub use icl::run_icl_sweep;

use std::time::Instant;

use coinfer_core::dist::DiscreteDistribution;

use crate::config::Env;
use crate::run::RunRecord;
use crate::CliError;

/// The expected outcome distribution for bias `theta` on the first outcome:
/// Bernoulli(θ) for coins; for larger spaces the remaining mass splits
/// evenly across the other outcomes.
pub fn biased_target(outcomes: usize, theta: f64) -> DiscreteDistribution {
    if outcomes == 2 {
        DiscreteDistribution::bernoulli(theta).expect("grid theta lies in [0,1]")
    } else {
        let mut probs = vec![(1.0 - theta) / (outcomes - 1) as f64; outcomes];
        probs[0] = theta;
        DiscreteDistribution::new(probs).expect("biased target sums to 1")
    }
}

/// Number of result prompts in play for this run.
pub fn prompt_count(env: &Env) -> usize {
    let all = env.corpus.results().len();
    env.config.prompt_limit.map_or(all, |limit| limit.min(all))
}

/// Collected output of one independent trial.
#[derive(Debug, Default)]
pub struct TrialOutput {
    pub rows: Vec<crate::run::ResultRow>,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

/// Fold per-trial outputs (already in trial order) into the record.
pub fn absorb(record: &mut RunRecord, outputs: Vec<TrialOutput>) {
    for out in outputs {
        record.rows.extend(out.rows);
        record.trial_errors.extend(out.errors);
        record.warnings.extend(out.warnings);
    }
}

pub fn finish(record: &mut RunRecord, env: &Env, started: Instant) {
    record.warnings.extend(env.provider_warnings());
    record.wall_clock.elapsed_secs = started.elapsed().as_secs_f64();
}

/// Run the experiment selected by name (the CLI subcommand, underscored).
pub fn run(kind: &str, env: &Env) -> Result<RunRecord, CliError> {
    match kind {
        "bias_sweep" => run_bias_sweep(env),
        "icl_sweep" => run_icl_sweep(env),
        "changepoint" => run_changepoint(env),
        "gamma_fit" => run_gamma_fit(env),
        "attention_corr" => run_attention_corr(env),
        other => Err(CliError::Config(format!("unknown experiment {other:?}"))),
    }
}
