//! Discount-factor fit: trace each predictor along a shared set of
//! changepoint trajectories and fit one γ per predictor, pooled across the
//! trajectories. Emits the per-predictor table as CSV rows and an aligned
//! plain-text report.

use std::time::Instant;

use rayon::prelude::*;

use coinfer_core::fitting::{fit_gamma_pooled, FitError};
use coinfer_core::predictors::{trace_predictor, PredictionTrace};
use coinfer_core::trajectory::{child_seed, sample_trajectory, Trajectory};

use super::finish;
use crate::config::Env;
use crate::run::{ResultRow, RunRecord, SummaryRow};
use crate::CliError;

enum FitOutcome {
    Fitted(coinfer_core::fitting::GammaFitResult),
    Degenerate(String),
    Failed(String),
}

pub fn run_gamma_fit(env: &Env) -> Result<RunRecord, CliError> {
    let started = Instant::now();
    if env.space.len() != 2 {
        return Err(CliError::Config(
            "gamma fitting models a two-outcome process".into(),
        ));
    }
    let mut record = RunRecord::new("gamma_fit", env.config.clone());

    // One trajectory set shared by every predictor.
    let mut trajectories: Vec<Trajectory> = Vec::with_capacity(env.config.trials);
    for rep in 0..env.config.trials {
        let seed = child_seed(env.config.seed, rep as u64);
        trajectories.push(
            sample_trajectory(&env.base_spec, &env.space, seed)
                .map_err(|e| CliError::Run(format!("trajectory {rep}: {e}")))?,
        );
    }

    let outcomes: Vec<(String, FitOutcome)> = env
        .predictors
        .par_iter()
        .map(|predictor| {
            let id = predictor.id().to_string();
            let mut traces: Vec<PredictionTrace> = Vec::with_capacity(trajectories.len());
            for trajectory in &trajectories {
                match trace_predictor(predictor.as_ref(), trajectory, &env.space) {
                    Ok(trace) => traces.push(trace),
                    Err(e) => return (id, FitOutcome::Failed(format!("trace: {e}"))),
                }
            }
            let pairs: Vec<(&PredictionTrace, &Trajectory)> =
                traces.iter().zip(trajectories.iter()).collect();
            match fit_gamma_pooled(&pairs, env.prior, env.fit_opts) {
                Ok(fit) => (id, FitOutcome::Fitted(fit)),
                Err(e @ (FitError::NonIdentifiable { .. } | FitError::ConstantTrace { .. })) => {
                    (id, FitOutcome::Degenerate(e.to_string()))
                }
                Err(e) => (id, FitOutcome::Failed(e.to_string())),
            }
        })
        .collect();

    let mut table = String::from("predictor                        best-fit gamma   objective\n");
    table.push_str("-------------------------------  ---------------  ------------\n");
    for (id, outcome) in &outcomes {
        match outcome {
            FitOutcome::Fitted(fit) => {
                record
                    .rows
                    .push(ResultRow::new("gamma_fit", id, "gamma_star", fit.gamma_star));
                record.rows.push(ResultRow::new(
                    "gamma_fit",
                    id,
                    "objective",
                    fit.objective_value,
                ));
                record.rows.push(ResultRow::new(
                    "gamma_fit",
                    id,
                    "evaluations",
                    fit.evaluations as f64,
                ));
                record.rows.push(ResultRow::new(
                    "gamma_fit",
                    id,
                    "converged",
                    fit.converged as u8 as f64,
                ));
                record.summaries.push(SummaryRow {
                    predictor: id.clone(),
                    theta: None,
                    icl_count: None,
                    switch_point: None,
                    group: None,
                    metric: "gamma_star".to_string(),
                    mean: fit.gamma_star,
                    std: 0.0,
                    count: trajectories.len(),
                });
                table.push_str(&format!(
                    "{id:<31}  {:<15.4}  {:.3e}\n",
                    fit.gamma_star, fit.objective_value
                ));
            }
            FitOutcome::Degenerate(reason) => {
                record
                    .rows
                    .push(ResultRow::new("gamma_fit", id, "non_identifiable", 1.0));
                record.warnings.push(format!("{id}: {reason}"));
                table.push_str(&format!("{id:<31}  non-identifiable\n"));
            }
            FitOutcome::Failed(reason) => {
                record.trial_errors.push(format!("{id}: {reason}"));
                table.push_str(&format!("{id:<31}  failed\n"));
            }
        }
    }
    record.reports.push(("gamma_table.txt".to_string(), table));

    finish(&mut record, env, started);
    Ok(record)
}
