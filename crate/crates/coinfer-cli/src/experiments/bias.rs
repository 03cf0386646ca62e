//! Bias sweep: for every bias on the grid and every prompt in the corpus,
//! predict with the biasing statement and score the TVD against the expected
//! biased distribution.

use std::time::Instant;

use rayon::prelude::*;

use coinfer_core::metrics::tvd;
use coinfer_core::predictors::PredictorContext;

use super::{absorb, biased_target, finish, prompt_count, TrialOutput};
use crate::config::Env;
use crate::run::{mean_std, ResultRow, RunRecord, SummaryRow};
use crate::CliError;

pub fn run_bias_sweep(env: &Env) -> Result<RunRecord, CliError> {
    let started = Instant::now();
    let mut record = RunRecord::new("bias_sweep", env.config.clone());
    let prompts = prompt_count(env);
    let thetas: Vec<f64> = env
        .config
        .bias_grid_percent
        .iter()
        .map(|&p| p as f64 / 100.0)
        .collect();

    // Trial = (theta, prompt); theta-major order defines the trial index.
    let trials: Vec<(usize, usize)> = (0..thetas.len())
        .flat_map(|t| (0..prompts).map(move |p| (t, p)))
        .collect();

    let outputs: Vec<TrialOutput> = trials
        .par_iter()
        .enumerate()
        .map(|(trial_idx, &(theta_idx, prompt_id))| {
            let theta = thetas[theta_idx];
            let target = biased_target(env.space.len(), theta);
            let mut out = TrialOutput::default();
            let ctx = PredictorContext {
                space: &env.space,
                template_id: prompt_id,
                bias: Some(theta),
                history: &[],
                instruct: env.config.instruct,
            };
            for predictor in &env.predictors {
                match predictor.predict(&ctx) {
                    Ok(dist) => match tvd(&dist, &target) {
                        Ok(value) => out.rows.push(ResultRow {
                            prompt_id: Some(prompt_id),
                            theta: Some(theta),
                            trial: Some(trial_idx as u64),
                            ..ResultRow::new("bias_sweep", predictor.id(), "tvd", value)
                        }),
                        Err(e) => out.errors.push(format!(
                            "theta={theta} prompt={prompt_id} predictor={}: {e}",
                            predictor.id()
                        )),
                    },
                    Err(e) => out.errors.push(format!(
                        "theta={theta} prompt={prompt_id} predictor={}: {e}",
                        predictor.id()
                    )),
                }
            }
            out
        })
        .collect();
    absorb(&mut record, outputs);

    // Plot-ready aggregate: mean ± population std per (predictor, theta).
    for predictor in &env.predictors {
        for &theta in &thetas {
            let values: Vec<f64> = record
                .rows
                .iter()
                .filter(|r| {
                    r.predictor == predictor.id() && r.theta == Some(theta) && r.metric == "tvd"
                })
                .map(|r| r.value)
                .collect();
            if values.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&values);
            record.summaries.push(SummaryRow {
                predictor: predictor.id().to_string(),
                theta: Some(theta),
                icl_count: None,
                switch_point: None,
                group: None,
                metric: "tvd".to_string(),
                mean,
                std,
                count: values.len(),
            });
        }
    }

    finish(&mut record, env, started);
    Ok(record)
}
