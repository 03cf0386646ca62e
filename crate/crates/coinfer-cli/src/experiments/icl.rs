//! In-context sweep: sample a stationary history at each grid bias, predict
//! after the in-context examples, and score the TVD against the generating
//! distribution per (bias, example count).

use std::time::Instant;

use rayon::prelude::*;

use coinfer_core::metrics::tvd;
use coinfer_core::predictors::PredictorContext;
use coinfer_core::trajectory::{child_seed, sample_stationary};

use super::{absorb, biased_target, finish, prompt_count, TrialOutput};
use crate::config::Env;
use crate::run::{mean_std, ResultRow, RunRecord, SummaryRow};
use crate::CliError;

struct TrialDesc {
    theta: f64,
    icl_count: usize,
    prompt_id: usize,
}

pub fn run_icl_sweep(env: &Env) -> Result<RunRecord, CliError> {
    let started = Instant::now();
    let mut record = RunRecord::new("icl_sweep", env.config.clone());
    let prompts = prompt_count(env);
    let thetas: Vec<f64> = env
        .config
        .bias_grid_percent
        .iter()
        .map(|&p| p as f64 / 100.0)
        .collect();

    // Trial order (defines the seed substream): theta, then count, then
    // prompt, then replicate.
    let mut trials = Vec::new();
    for &theta in &thetas {
        for &icl_count in &env.config.icl_counts {
            for prompt_id in 0..prompts {
                for _rep in 0..env.config.trials {
                    trials.push(TrialDesc {
                        theta,
                        icl_count,
                        prompt_id,
                    });
                }
            }
        }
    }

    let outputs: Vec<TrialOutput> = trials
        .par_iter()
        .enumerate()
        .map(|(trial_idx, desc)| {
            let mut out = TrialOutput::default();
            let seed = child_seed(env.config.seed, trial_idx as u64);
            let target = biased_target(env.space.len(), desc.theta);
            let history = sample_stationary(&target, desc.icl_count, seed);
            let ctx = PredictorContext {
                space: &env.space,
                template_id: desc.prompt_id,
                bias: env.config.icl_bias_statement.then_some(desc.theta),
                history: &history,
                instruct: env.config.instruct,
            };
            for predictor in &env.predictors {
                match predictor.predict(&ctx).and_then(|dist| {
                    tvd(&dist, &target).map_err(|e| {
                        coinfer_core::predictors::PredictError::BadParams(e.to_string())
                    })
                }) {
                    Ok(value) => out.rows.push(ResultRow {
                        prompt_id: Some(desc.prompt_id),
                        theta: Some(desc.theta),
                        icl_count: Some(desc.icl_count),
                        trial: Some(trial_idx as u64),
                        seed: Some(seed),
                        ..ResultRow::new("icl_sweep", predictor.id(), "tvd", value)
                    }),
                    Err(e) => out.errors.push(format!(
                        "theta={} n={} prompt={} predictor={}: {e}",
                        desc.theta,
                        desc.icl_count,
                        desc.prompt_id,
                        predictor.id()
                    )),
                }
            }
            out
        })
        .collect();
    absorb(&mut record, outputs);

    // Plot-ready aggregate: mean TVD per (predictor, theta, example count).
    for predictor in &env.predictors {
        for &theta in &thetas {
            for &icl_count in &env.config.icl_counts {
                let values: Vec<f64> = record
                    .rows
                    .iter()
                    .filter(|r| {
                        r.predictor == predictor.id()
                            && r.theta == Some(theta)
                            && r.icl_count == Some(icl_count)
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
                    icl_count: Some(icl_count),
                    switch_point: None,
                    group: None,
                    metric: "tvd".to_string(),
                    mean,
                    std,
                    count: values.len(),
                });
            }
        }
    }

    finish(&mut record, env, started);
    Ok(record)
}
