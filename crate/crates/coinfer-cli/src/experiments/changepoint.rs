//! Changepoint rollout: per-step predictive probabilities alongside the
//! classical (γ = 1) and discounted filter means, for the base switchover or
//! a sweep over K.

use std::time::Instant;

use rayon::prelude::*;

use coinfer_core::oracle::DiscountedFilter;
use coinfer_core::predictors::PredictorContext;
use coinfer_core::trajectory::{child_seed, sample_trajectory, ChangepointSpec, SegmentSpec};

use super::{absorb, finish, TrialOutput};
use crate::config::Env;
use crate::run::{mean_std, ResultRow, RunRecord, SummaryRow};
use crate::CliError;

/// Steps at the end of the rollout averaged for the adaptation summary.
const FINAL_WINDOW: usize = 10;

/// The spec for one switchover value, reshaping the base two-segment
/// trajectory. K = N keeps a single first-regime segment.
pub(crate) fn spec_for_switch(base: &ChangepointSpec, k: usize) -> Result<ChangepointSpec, CliError> {
    if base.segments().len() != 2 {
        return Err(CliError::Config(
            "switchover sweeps need a two-segment base trajectory".into(),
        ));
    }
    let n = base.total_len();
    if k == 0 || k > n {
        return Err(CliError::Config(format!("switchover K={k} outside 1..={n}")));
    }
    let theta1 = base.segments()[0].theta().clone();
    let theta2 = base.segments()[1].theta().clone();
    let mut segments = vec![SegmentSpec::new(k, theta1).expect("k >= 1")];
    if k < n {
        segments.push(SegmentSpec::new(n - k, theta2).expect("n - k >= 1"));
    }
    ChangepointSpec::new(segments).map_err(|e| CliError::Config(e.to_string()))
}

pub fn run_changepoint(env: &Env) -> Result<RunRecord, CliError> {
    let started = Instant::now();
    if env.space.len() != 2 {
        return Err(CliError::Config(
            "changepoint rollouts model a two-outcome process".into(),
        ));
    }
    let mut record = RunRecord::new("changepoint", env.config.clone());

    // Filter columns: the classical γ = 1 filter always, plus configured γs.
    let mut gammas = vec![1.0];
    for &g in &env.config.gammas {
        if !gammas.contains(&g) {
            gammas.push(g);
        }
    }

    let k_values: Vec<usize> = match &env.config.switch_sweep {
        Some(ks) => ks.clone(),
        None => vec![env.base_spec.switch_points()[0]],
    };
    let mut specs = Vec::with_capacity(k_values.len());
    for &k in &k_values {
        let spec = if env.config.switch_sweep.is_some() {
            spec_for_switch(&env.base_spec, k)?
        } else {
            env.base_spec.clone()
        };
        specs.push((k, spec));
    }

    // Trial order: K-major, then replicate.
    let trials: Vec<usize> = (0..specs.len())
        .flat_map(|ki| std::iter::repeat_n(ki, env.config.trials))
        .collect();

    let outputs: Vec<TrialOutput> = trials
        .par_iter()
        .enumerate()
        .map(|(trial_idx, &ki)| {
            let (k, spec) = &specs[ki];
            let mut out = TrialOutput::default();
            let seed = child_seed(env.config.seed, trial_idx as u64);
            let trajectory = match sample_trajectory(spec, &env.space, seed) {
                Ok(t) => t,
                Err(e) => {
                    out.errors.push(format!("K={k} trial={trial_idx}: {e}"));
                    return out;
                }
            };
            let n = trajectory.len();
            let row = |predictor: &str, metric: &str, step: usize, value: f64| ResultRow {
                switch_point: Some(*k),
                trial: Some(trial_idx as u64),
                seed: Some(seed),
                step: Some(step),
                ..ResultRow::new("changepoint", predictor, metric, value)
            };

            // Observations and the generating parameter, steps 1..=N.
            for (t, &o) in trajectory.outcomes().iter().enumerate() {
                out.rows.push(row("", "observed", t + 1, o as f64));
                out.rows.push(row(
                    "",
                    "segment_theta",
                    t + 1,
                    spec.theta_at(t).expect("step within spec").p_first(),
                ));
            }

            // Filter means before each observation plus the final posterior
            // (step N+1), one column per γ.
            for &gamma in &gammas {
                let metric = format!("filter_mean[gamma={gamma}]");
                let mut filter =
                    DiscountedFilter::new(env.prior, gamma).expect("validated gamma");
                for (t, &o) in trajectory.outcomes().iter().enumerate() {
                    out.rows.push(row("", &metric, t + 1, filter.mean()));
                    filter = filter.step(o).expect("binary outcome");
                }
                out.rows.push(row("", &metric, n + 1, filter.mean()));
            }

            // Predictor traces under predict-then-observe, including the
            // step-(N+1) prediction after the full history.
            for predictor in &env.predictors {
                let mut steps = Vec::with_capacity(n + 1);
                let mut failure = None;
                for t in 0..=n {
                    let ctx = PredictorContext {
                        space: &env.space,
                        template_id: 0,
                        bias: None,
                        history: &trajectory.outcomes()[..t],
                        instruct: env.config.instruct,
                    };
                    match predictor.predict(&ctx) {
                        Ok(dist) => steps.push(dist.p_first()),
                        Err(e) => {
                            failure = Some(format!(
                                "K={k} trial={trial_idx} predictor={} step={}: {e}",
                                predictor.id(),
                                t + 1
                            ));
                            break;
                        }
                    }
                }
                if let Some(e) = failure {
                    out.errors.push(e);
                    continue;
                }
                for (t, &p) in steps.iter().enumerate() {
                    out.rows
                        .push(row(predictor.id(), "predictor_p_heads", t + 1, p));
                }
                // Per-trial adaptation statistic over the last observed steps.
                let window = &steps[n.saturating_sub(FINAL_WINDOW)..n];
                let final_mean = window.iter().sum::<f64>() / window.len() as f64;
                let mut final_row =
                    row(predictor.id(), "final10_mean_p_heads", 0, final_mean);
                final_row.step = None;
                out.rows.push(final_row);
            }
            out
        })
        .collect();
    absorb(&mut record, outputs);

    // Adaptation summary per (predictor, K), against the last-regime
    // parameter.
    let theta2 = env
        .base_spec
        .segments()
        .last()
        .expect("validated spec")
        .theta()
        .p_first();
    for predictor in &env.predictors {
        for (k, _) in &specs {
            let finals: Vec<f64> = record
                .rows
                .iter()
                .filter(|r| {
                    r.predictor == predictor.id()
                        && r.metric == "final10_mean_p_heads"
                        && r.switch_point == Some(*k)
                })
                .map(|r| r.value)
                .collect();
            if finals.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&finals);
            record.summaries.push(SummaryRow {
                predictor: predictor.id().to_string(),
                theta: None,
                icl_count: None,
                switch_point: Some(*k),
                group: None,
                metric: "final10_mean_p_heads".to_string(),
                mean,
                std,
                count: finals.len(),
            });
            let devs: Vec<f64> = finals.iter().map(|m| (m - theta2).abs()).collect();
            let (mean, std) = mean_std(&devs);
            record.summaries.push(SummaryRow {
                predictor: predictor.id().to_string(),
                theta: None,
                icl_count: None,
                switch_point: Some(*k),
                group: None,
                metric: "final10_abs_dev_from_theta2".to_string(),
                mean,
                std,
                count: devs.len(),
            });
        }
    }

    finish(&mut record, env, started);
    Ok(record)
}
