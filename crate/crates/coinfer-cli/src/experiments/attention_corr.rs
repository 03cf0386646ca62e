//! Attention correlation: join externally extracted attention traces with
//! regenerated trajectories, score point-estimate extremity under the true
//! posterior, and correlate it with per-segment attention mass.

use std::time::Instant;

use rayon::prelude::*;

use coinfer_core::metrics::{attention_analysis, cdf_extremity, ScoredAttention};
use coinfer_core::oracle::ObservationCounts;
use coinfer_core::trajectory::{child_seed, empirical_counts, sample_trajectory};

use super::changepoint::spec_for_switch;
use super::finish;
use crate::attention::read_attention_csv;
use crate::config::Env;
use crate::run::{ResultRow, RunRecord, SummaryRow};
use crate::CliError;

pub fn run_attention_corr(env: &Env) -> Result<RunRecord, CliError> {
    let started = Instant::now();
    if env.space.len() != 2 {
        return Err(CliError::Config(
            "attention analysis models a two-outcome process".into(),
        ));
    }
    let csv_path = env
        .config
        .attention_csv
        .as_ref()
        .ok_or_else(|| CliError::Config("attention-corr needs attention_csv".into()))?;
    let mut record = RunRecord::new("attention_corr", env.config.clone());

    let parsed = read_attention_csv(csv_path)?;
    record.trial_errors.extend(parsed.malformed);

    let n = env.base_spec.total_len();

    // Rebuild each trial's trajectory from (config seed, trial_id) and the
    // row's switchover point, then score the point estimate under the exact
    // posterior of the regenerated flips.
    let scored: Vec<Result<ScoredAttention, String>> = parsed
        .records
        .par_iter()
        .map(|rec| {
            let spec = spec_for_switch(&env.base_spec, rec.switch_point)
                .map_err(|e| format!("trial {}: {e}", rec.trial_id))?;
            let seed = child_seed(env.config.seed, rec.trial_id);
            let trajectory = sample_trajectory(&spec, &env.space, seed)
                .map_err(|e| format!("trial {}: {e}", rec.trial_id))?;
            let counts = empirical_counts(&trajectory, 0..n)
                .map_err(|e| format!("trial {}: {e}", rec.trial_id))?;
            let obs = ObservationCounts::new(counts[0], n as u64)
                .map_err(|e| format!("trial {}: {e}", rec.trial_id))?;
            let posterior = env.prior.update(obs);
            let extremity = cdf_extremity(rec.point_estimate, posterior)
                .map_err(|e| format!("trial {}: {e}", rec.trial_id))?;
            Ok(ScoredAttention {
                record: *rec,
                extremity,
                posterior_mean: posterior.mean(),
                total_len: n,
            })
        })
        .collect();

    let mut usable = Vec::with_capacity(scored.len());
    for item in scored {
        match item {
            Ok(s) => usable.push(s),
            Err(e) => record.trial_errors.push(e),
        }
    }
    if usable.len() < 3 {
        return Err(CliError::Run(format!(
            "attention analysis needs at least 3 usable rows, got {}",
            usable.len()
        )));
    }

    let analysis =
        attention_analysis(&usable).map_err(|e| CliError::Run(format!("analysis: {e}")))?;

    for s in &usable {
        let base = |metric: &str, value: f64| ResultRow {
            switch_point: Some(s.record.switch_point),
            trial: Some(s.record.trial_id),
            ..ResultRow::new("attention_corr", "", metric, value)
        };
        record.rows.push(base("attn_seg1", s.record.attn_seg1));
        record.rows.push(base("attn_seg2", s.record.attn_seg2));
        record
            .rows
            .push(base("point_estimate", s.record.point_estimate));
        record.rows.push(base("extremity", s.extremity));
        record.rows.push(base("posterior_mean", s.posterior_mean));
    }
    for row in &analysis.fractions {
        let base = |metric: &str, value: f64| ResultRow {
            switch_point: Some(row.switch_point),
            trial: Some(row.trial_id),
            ..ResultRow::new("attention_corr", "", metric, value)
        };
        record.rows.push(base("fraction_seg1", row.fraction_seg1));
        record.rows.push(base("fraction_seg2", row.fraction_seg2));
        record.rows.push(base("deviation", row.deviation));
    }

    for (name, corr) in [("seg1", &analysis.seg1), ("seg2", &analysis.seg2)] {
        if let Some(c) = corr {
            for (metric, value) in [("r", c.r), ("p_value", c.p_value)] {
                record.summaries.push(SummaryRow {
                    predictor: String::new(),
                    theta: None,
                    icl_count: None,
                    switch_point: None,
                    group: Some(name.to_string()),
                    metric: metric.to_string(),
                    mean: value,
                    std: 0.0,
                    count: c.n,
                });
            }
        }
    }
    for fit in &analysis.group_fits {
        for (metric, value) in [
            ("quad_c0", fit.coefficients[0]),
            ("quad_c1", fit.coefficients[1]),
            ("quad_c2", fit.coefficients[2]),
        ] {
            record.summaries.push(SummaryRow {
                predictor: String::new(),
                theta: None,
                icl_count: None,
                switch_point: None,
                group: Some(format!("M={}", fit.m)),
                metric: metric.to_string(),
                mean: value,
                std: 0.0,
                count: fit.count,
            });
        }
    }
    for note in &analysis.skipped {
        record
            .warnings
            .push(format!("{}: {}", note.what, note.reason));
    }

    finish(&mut record, env, started);
    Ok(record)
}
