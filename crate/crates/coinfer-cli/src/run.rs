//! Run records and output writing.
//!
//! A run directory holds:
//! - `config.json` — the configuration snapshot; re-running from it
//!   reproduces `results.csv` byte for byte (synthetic predictors, or remote
//!   predictors behind the replay cache),
//! - `results.csv` — tidy long format, one metric per row,
//! - `summary.csv` — grouped aggregates,
//! - `warnings.log` — warnings and per-trial errors, one per line,
//! - `run.json` — the full record including versions and wall-clock data.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

/// One tidy result row. Optional keys are empty in experiments where they do
/// not apply.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub predictor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub icl_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_point: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub metric: String,
    pub value: f64,
}

impl ResultRow {
    /// A row with every optional key empty.
    pub fn new(experiment: &str, predictor: &str, metric: &str, value: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            predictor: predictor.to_string(),
            prompt_id: None,
            theta: None,
            icl_count: None,
            switch_point: None,
            trial: None,
            seed: None,
            step: None,
            metric: metric.to_string(),
            value,
        }
    }
}

/// One aggregate row of `summary.csv`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SummaryRow {
    pub predictor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub icl_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_point: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Wall-clock metadata; excluded from the reproducibility comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_secs: u64,
    pub elapsed_secs: f64,
}

/// Everything a run produced. Sufficient to re-run bit-identically: the
/// config snapshot carries every effective parameter, and each row is
/// traceable to (seed, trial index).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub library_version: String,
    pub rng_algorithm: String,
    pub rendering_version: String,
    /// Which standard deviation `summary.csv` reports.
    pub std_kind: String,
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<SummaryRow>,
    pub warnings: Vec<String>,
    pub trial_errors: Vec<String>,
    /// Experiment-specific report files written alongside the CSVs, as
    /// (filename, content) pairs.
    #[serde(default)]
    pub reports: Vec<(String, String)>,
    pub wall_clock: WallClock,
}

impl RunRecord {
    pub fn new(experiment: &str, config: ExperimentConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            config,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            rng_algorithm: coinfer_core::RNG_ALGORITHM.to_string(),
            rendering_version: coinfer_core::prompt::RENDERING_VERSION.to_string(),
            std_kind: "population".to_string(),
            rows: Vec::new(),
            summaries: Vec::new(),
            warnings: Vec::new(),
            trial_errors: Vec::new(),
            reports: Vec::new(),
            wall_clock: WallClock {
                started_unix_secs: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                elapsed_secs: 0.0,
            },
        }
    }

    /// Write the run directory (created if missing).
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;

        let config_json = serde_json::to_string_pretty(&self.config)
            .map_err(|e| CliError::Run(format!("serialize config: {e}")))?;
        fs::write(dir.join("config.json"), config_json + "\n")?;

        write_results_csv(&dir.join("results.csv"), &self.rows)?;
        write_summary_csv(&dir.join("summary.csv"), &self.summaries)?;

        let mut log = String::new();
        for w in &self.warnings {
            log.push_str("warning: ");
            log.push_str(w);
            log.push('\n');
        }
        for e in &self.trial_errors {
            log.push_str("error: ");
            log.push_str(e);
            log.push('\n');
        }
        fs::write(dir.join("warnings.log"), log)?;

        for (name, content) in &self.reports {
            fs::write(dir.join(name), content)?;
        }

        let record_json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Run(format!("serialize run record: {e}")))?;
        fs::write(dir.join("run.json"), record_json + "\n")?;
        Ok(())
    }
}

fn opt_num<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Run(format!("open {}: {e}", path.display())))?;
    writer
        .write_record([
            "experiment",
            "predictor",
            "prompt_id",
            "theta",
            "icl_count",
            "switch_point",
            "trial",
            "seed",
            "step",
            "metric",
            "value",
        ])
        .map_err(|e| CliError::Run(e.to_string()))?;
    for row in rows {
        writer
            .write_record([
                row.experiment.clone(),
                row.predictor.clone(),
                opt_num(&row.prompt_id),
                opt_num(&row.theta),
                opt_num(&row.icl_count),
                opt_num(&row.switch_point),
                opt_num(&row.trial),
                opt_num(&row.seed),
                opt_num(&row.step),
                row.metric.clone(),
                row.value.to_string(),
            ])
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Run(format!("open {}: {e}", path.display())))?;
    writer
        .write_record([
            "predictor",
            "theta",
            "icl_count",
            "switch_point",
            "group",
            "metric",
            "mean",
            "std",
            "count",
        ])
        .map_err(|e| CliError::Run(e.to_string()))?;
    for row in rows {
        writer
            .write_record([
                row.predictor.clone(),
                opt_num(&row.theta),
                opt_num(&row.icl_count),
                opt_num(&row.switch_point),
                row.group.clone().unwrap_or_default(),
                row.metric.clone(),
                row.mean.to_string(),
                row.std.to_string(),
                row.count.to_string(),
            ])
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Mean and population standard deviation of a value slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
