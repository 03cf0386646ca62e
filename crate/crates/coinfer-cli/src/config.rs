//! Experiment configuration: the JSON schema, predictor-spec strings, and
//! resolution into ready-to-run objects.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use coinfer_core::fitting::GammaFitOptions;
use coinfer_core::oracle::{BetaParams, DirichletParams};
use coinfer_core::predictors::{make_reference_predictor, Predictor, ReferenceParams};
use coinfer_core::prompt::PromptCorpus;
use coinfer_core::trajectory::{ChangepointSpec, OutcomeSpace, SegmentSpec};

use crate::provider::{ProviderSettings, RemotePredictor};
use crate::CliError;

/// Outcome space selection: a named builtin ("coin", "die") or explicit
/// labels.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SpaceConfig {
    Named(String),
    Labels { labels: Vec<String> },
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig::Named("coin".to_string())
    }
}

/// One trajectory segment: `length` draws with P(first outcome) = `theta`,
/// or an explicit probability vector for larger spaces.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SegmentConfig {
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

/// Beta prior (or an explicit Dirichlet concentration for larger spaces)
/// used by oracles, filters, and fits.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PriorConfig {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            concentration: None,
        }
    }
}

/// Discount-factor search settings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitConfig {
    #[serde(default = "default_fit_lower")]
    pub lower: f64,
    #[serde(default = "default_fit_upper")]
    pub upper: f64,
    #[serde(default = "default_fit_tol")]
    pub tol: f64,
}

fn default_fit_lower() -> f64 {
    1e-3
}
fn default_fit_upper() -> f64 {
    1.0
}
fn default_fit_tol() -> f64 {
    1e-4
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lower: default_fit_lower(),
            upper: default_fit_upper(),
            tol: default_fit_tol(),
        }
    }
}

/// The full experiment configuration. Unknown fields are rejected so typos
/// surface as config errors instead of silently applied defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; every trial derives a child seed from (seed, trial index).
    pub seed: u64,
    /// Predictor specs, e.g. "exact_bayes", "discounted_bayes:gamma=0.5",
    /// "fixed_bias:theta=0.7", "miscalibrated_bayes:alpha=7,beta=3",
    /// "remote".
    #[serde(default = "default_predictors")]
    pub predictors: Vec<String>,
    #[serde(default)]
    pub outcome_space: SpaceConfig,
    /// Bias grid in whole percent (0..=100).
    #[serde(default = "default_bias_grid")]
    pub bias_grid_percent: Vec<u32>,
    /// In-context example counts for the ICL sweep.
    #[serde(default = "default_icl_counts")]
    pub icl_counts: Vec<usize>,
    /// Replicates per grid cell (sampled histories / rollouts / pooled
    /// trajectories, depending on the experiment).
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Use only the first N prompts of the corpus (all when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_limit: Option<usize>,
    /// Whether the rendered prompt carries the biasing statement in the ICL
    /// sweep (the bias sweep always renders it).
    #[serde(default)]
    pub icl_bias_statement: bool,
    /// Changepoint trajectory segments.
    #[serde(default = "default_trajectory")]
    pub trajectory: Vec<SegmentConfig>,
    /// Optional switchover sweep: one rollout set per K, reshaping the
    /// two-segment trajectory to (K, N−K).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_sweep: Option<Vec<usize>>,
    /// Discounted-filter columns emitted by the changepoint rollout.
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub instruct: bool,
    /// Result-prompt corpus file (one prompt per line); builtin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruct_prompts_file: Option<PathBuf>,
    /// Remote provider endpoint: "tcp://host:port" or "http://…".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
    /// Replay-cache path for remote predictors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    /// Never touch the network; a cache miss is an error.
    #[serde(default)]
    pub replay_only: bool,
    /// Maximum concurrent in-flight provider requests.
    #[serde(default = "default_concurrency")]
    pub provider_concurrency: usize,
    /// Per-outcome continuation strings for remote predictors; defaults to
    /// the labels with a leading space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuations: Option<Vec<String>>,
    /// Attention trace CSV for the attention-corr experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention_csv: Option<PathBuf>,
    #[serde(default)]
    pub fit: FitConfig,
}

fn default_predictors() -> Vec<String> {
    vec!["exact_bayes".to_string()]
}

fn default_bias_grid() -> Vec<u32> {
    (0..=100).step_by(10).collect()
}

fn default_icl_counts() -> Vec<usize> {
    vec![0, 1, 3, 5, 10, 30, 50, 100]
}

fn default_trials() -> usize {
    1
}

fn default_trajectory() -> Vec<SegmentConfig> {
    vec![
        SegmentConfig {
            length: 50,
            theta: Some(0.75),
            probs: None,
        },
        SegmentConfig {
            length: 50,
            theta: Some(0.25),
            probs: None,
        },
    ]
}

fn default_gammas() -> Vec<f64> {
    vec![0.5]
}

fn default_concurrency() -> usize {
    4
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{\"seed\": 0}").expect("defaults deserialize")
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.predictors.is_empty() {
            return Err(CliError::Config("no predictors configured".into()));
        }
        for (i, spec) in self.predictors.iter().enumerate() {
            if self.predictors[..i].iter().any(|s| s.trim() == spec.trim()) {
                return Err(CliError::Config(format!(
                    "duplicate predictor spec {spec:?}"
                )));
            }
        }
        if self.bias_grid_percent.is_empty() {
            return Err(CliError::Config("bias grid is empty".into()));
        }
        if self.bias_grid_percent.iter().any(|&p| p > 100) {
            return Err(CliError::Config("bias grid entries must be 0..=100".into()));
        }
        if self.icl_counts.is_empty() {
            return Err(CliError::Config("icl_counts is empty".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if self.trajectory.is_empty() {
            return Err(CliError::Config("trajectory has no segments".into()));
        }
        if self.gammas.iter().any(|&g| !(g > 0.0 && g <= 1.0)) {
            return Err(CliError::Config("gammas must lie in (0, 1]".into()));
        }
        if !(self.fit.lower > 0.0 && self.fit.lower < self.fit.upper && self.fit.upper <= 1.0) {
            return Err(CliError::Config(
                "fit bounds must satisfy 0 < lower < upper <= 1".into(),
            ));
        }
        for path in [&self.prompts_file, &self.instruct_prompts_file, &self.cache]
            .into_iter()
            .flatten()
        {
            // The cache may not exist yet; prompt files must.
            if Some(path) != self.cache.as_ref() && !path.exists() {
                return Err(CliError::Config(format!(
                    "referenced file does not exist: {}",
                    path.display()
                )));
            }
        }
        if let Some(csv) = &self.attention_csv {
            if !csv.exists() {
                return Err(CliError::Config(format!(
                    "attention csv does not exist: {}",
                    csv.display()
                )));
            }
        }
        Ok(())
    }
}

/// A parsed predictor spec string.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSpec {
    pub kind: String,
    pub params: Vec<(String, f64)>,
}

/// Parse "kind", "kind:0.7", or "kind:key=v,key=v".
pub fn parse_predictor_spec(spec: &str) -> Result<PredictorSpec, CliError> {
    let bad = |msg: String| CliError::Config(format!("predictor spec {spec:?}: {msg}"));
    let (kind, rest) = match spec.split_once(':') {
        Some((k, r)) => (k.trim(), Some(r.trim())),
        None => (spec.trim(), None),
    };
    if kind.is_empty() {
        return Err(bad("empty kind".into()));
    }
    let mut params = Vec::new();
    if let Some(rest) = rest {
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            match part.split_once('=') {
                Some((key, value)) => {
                    let v: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad number {value:?}")))?;
                    params.push((key.trim().to_string(), v));
                }
                None => {
                    // Positional shorthand: the kind's principal parameter.
                    let v: f64 = part
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad number {part:?}")))?;
                    let key = match kind {
                        "fixed_bias" => "theta",
                        "discounted_bayes" => "gamma",
                        other => {
                            return Err(bad(format!(
                                "positional parameter not supported for {other:?}"
                            )))
                        }
                    };
                    params.push((key.to_string(), v));
                }
            }
        }
    }
    Ok(PredictorSpec {
        kind: kind.to_string(),
        params,
    })
}

/// Everything an experiment needs, resolved from a validated config.
pub struct Env {
    pub config: ExperimentConfig,
    pub space: OutcomeSpace,
    pub corpus: PromptCorpus,
    pub predictors: Vec<Arc<dyn Predictor>>,
    /// Remote predictors again, by their concrete type, so runs can surface
    /// provider-side counters (probability-floor clamps) as warnings.
    pub remotes: Vec<Arc<RemotePredictor>>,
    pub prior: BetaParams,
    pub prior_dirichlet: DirichletParams,
    pub base_spec: ChangepointSpec,
    pub fit_opts: GammaFitOptions,
}

impl Env {
    pub fn build(config: ExperimentConfig) -> Result<Self, CliError> {
        config.validate()?;

        let space = match &config.outcome_space {
            SpaceConfig::Named(name) => match name.as_str() {
                "coin" => OutcomeSpace::coin(),
                "die" => OutcomeSpace::die(),
                other => {
                    return Err(CliError::Config(format!(
                        "unknown outcome space {other:?} (expected \"coin\", \"die\", or labels)"
                    )))
                }
            },
            SpaceConfig::Labels { labels } => OutcomeSpace::new(labels.clone())
                .map_err(|e| CliError::Config(format!("outcome space: {e}")))?,
        };

        let corpus = load_corpus(&config, &space)?;
        let prior = BetaParams::new(config.prior.alpha, config.prior.beta)
            .map_err(|e| CliError::Config(format!("prior: {e}")))?;
        let prior_dirichlet = match &config.prior.concentration {
            Some(c) => DirichletParams::new(c.clone())
                .map_err(|e| CliError::Config(format!("prior concentration: {e}")))?,
            None if space.len() == 2 => {
                DirichletParams::new(vec![prior.alpha(), prior.beta()]).expect("valid pair")
            }
            None => DirichletParams::uniform(space.len()).expect("valid arity"),
        };
        if prior_dirichlet.len() != space.len() {
            return Err(CliError::Config(format!(
                "prior concentration has {} entries for a {}-outcome space",
                prior_dirichlet.len(),
                space.len()
            )));
        }

        let base_spec = build_spec(&config.trajectory, &space)?;
        let fit_opts = GammaFitOptions {
            bounds: (config.fit.lower, config.fit.upper),
            tol: config.fit.tol,
            ..GammaFitOptions::default()
        };

        let mut predictors: Vec<Arc<dyn Predictor>> = Vec::new();
        let mut remotes: Vec<Arc<RemotePredictor>> = Vec::new();
        for spec_str in &config.predictors {
            match build_predictor(spec_str, &config, &space, &corpus)? {
                Built::Reference(p) => predictors.push(p),
                Built::Remote(r) => {
                    remotes.push(r.clone());
                    predictors.push(r);
                }
            }
        }

        Ok(Self {
            config,
            space,
            corpus,
            predictors,
            remotes,
            prior,
            prior_dirichlet,
            base_spec,
            fit_opts,
        })
    }

    /// Provider-side counters accumulated during a run, as warning lines.
    pub fn provider_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for remote in &self.remotes {
            let clamped = remote.clamped_count();
            if clamped > 0 {
                out.push(format!(
                    "{}: {clamped} outcome probabilities clamped at the 1e-300 floor",
                    remote.id()
                ));
            }
        }
        out
    }
}

enum Built {
    Reference(Arc<dyn Predictor>),
    Remote(Arc<RemotePredictor>),
}

/// Reference predictor carrying its spec string as the id, so runs with
/// several parameterizations of one kind stay distinguishable in the output.
struct NamedPredictor {
    id: String,
    inner: Box<dyn Predictor>,
}

impl Predictor for NamedPredictor {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(
        &self,
        ctx: &coinfer_core::predictors::PredictorContext<'_>,
    ) -> Result<coinfer_core::dist::DiscreteDistribution, coinfer_core::predictors::PredictError>
    {
        self.inner.predict(ctx)
    }
}

fn load_corpus(config: &ExperimentConfig, space: &OutcomeSpace) -> Result<PromptCorpus, CliError> {
    let builtin = if space.len() == 2 {
        PromptCorpus::builtin_coin()
    } else {
        PromptCorpus::builtin_die()
    };
    let results = match &config.prompts_file {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        None => return ok_with_instruct(config, builtin),
    };
    let instruct = match &config.instruct_prompts_file {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        None => builtin.instruct().join("\n"),
    };
    PromptCorpus::from_lines(&results, &instruct, builtin.bias_template())
        .map_err(|e| CliError::Config(format!("prompt corpus: {e}")))
}

fn ok_with_instruct(
    config: &ExperimentConfig,
    builtin: PromptCorpus,
) -> Result<PromptCorpus, CliError> {
    match &config.instruct_prompts_file {
        None => Ok(builtin),
        Some(path) => {
            let instruct = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            PromptCorpus::from_lines(
                &builtin.results().join("\n"),
                &instruct,
                builtin.bias_template(),
            )
            .map_err(|e| CliError::Config(format!("prompt corpus: {e}")))
        }
    }
}

pub fn build_spec(
    segments: &[SegmentConfig],
    space: &OutcomeSpace,
) -> Result<ChangepointSpec, CliError> {
    let mut specs = Vec::with_capacity(segments.len());
    for seg in segments {
        let spec = match (&seg.theta, &seg.probs) {
            (Some(theta), None) if space.len() == 2 => SegmentSpec::coin(seg.length, *theta)
                .map_err(|e| CliError::Config(format!("segment: {e}"))),
            (Some(theta), None) => {
                // First outcome gets theta, the rest split the remainder.
                let k = space.len();
                let mut probs = vec![(1.0 - theta) / (k - 1) as f64; k];
                probs[0] = *theta;
                coinfer_core::dist::DiscreteDistribution::new(probs)
                    .map_err(|e| CliError::Config(format!("segment: {e}")))
                    .and_then(|d| {
                        SegmentSpec::new(seg.length, d)
                            .map_err(|e| CliError::Config(format!("segment: {e}")))
                    })
            }
            (None, Some(probs)) => coinfer_core::dist::DiscreteDistribution::new(probs.clone())
                .map_err(|e| CliError::Config(format!("segment: {e}")))
                .and_then(|d| {
                    SegmentSpec::new(seg.length, d)
                        .map_err(|e| CliError::Config(format!("segment: {e}")))
                }),
            _ => Err(CliError::Config(
                "segment needs exactly one of theta or probs".into(),
            )),
        }?;
        specs.push(spec);
    }
    ChangepointSpec::new(specs).map_err(|e| CliError::Config(format!("trajectory: {e}")))
}

fn build_predictor(
    spec_str: &str,
    config: &ExperimentConfig,
    space: &OutcomeSpace,
    corpus: &PromptCorpus,
) -> Result<Built, CliError> {
    let spec = parse_predictor_spec(spec_str)?;
    if spec.kind == "remote" {
        let settings = ProviderSettings {
            endpoint: config.provider.clone(),
            cache: config.cache.clone(),
            replay_only: config.replay_only,
            concurrency: config.provider_concurrency,
            instruct: config.instruct,
            continuations: config.continuations.clone(),
        };
        let remote = RemotePredictor::build(settings, space, corpus.clone())?;
        return Ok(Built::Remote(Arc::new(remote)));
    }

    let mut params = ReferenceParams {
        num_outcomes: Some(space.len()),
        ..ReferenceParams::default()
    };
    let mut alpha: Option<f64> = None;
    let mut beta: Option<f64> = None;
    for (key, value) in &spec.params {
        match key.as_str() {
            "gamma" => params.gamma = Some(*value),
            "theta" => params.theta = Some(*value),
            "alpha" => alpha = Some(*value),
            "beta" => beta = Some(*value),
            other => {
                return Err(CliError::Config(format!(
                    "predictor spec {spec_str:?}: unknown parameter {other:?}"
                )))
            }
        }
    }
    if alpha.is_some() || beta.is_some() {
        params.prior = Some(vec![alpha.unwrap_or(1.0), beta.unwrap_or(1.0)]);
    } else if spec.kind == "miscalibrated_bayes" {
        // The factory requires an explicit prior for this kind.
        params.prior = None;
    } else if config.prior != PriorConfig::default() || space.len() != 2 {
        params.prior = Some(match &config.prior.concentration {
            Some(c) => c.clone(),
            None if space.len() == 2 => vec![config.prior.alpha, config.prior.beta],
            None => vec![1.0; space.len()],
        });
    }

    let predictor = make_reference_predictor(&spec.kind, &params)
        .map_err(|e| CliError::Config(format!("predictor spec {spec_str:?}: {e}")))?;
    Ok(Built::Reference(Arc::new(NamedPredictor {
        id: spec_str.trim().to_string(),
        inner: predictor,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictor_spec_grammar() {
        let s = parse_predictor_spec("discounted_bayes:gamma=0.5,alpha=2").unwrap();
        assert_eq!(s.kind, "discounted_bayes");
        assert_eq!(
            s.params,
            vec![("gamma".to_string(), 0.5), ("alpha".to_string(), 2.0)]
        );
        let s = parse_predictor_spec("fixed_bias:0.7").unwrap();
        assert_eq!(s.params, vec![("theta".to_string(), 0.7)]);
        assert!(parse_predictor_spec("exact_bayes:whatever").is_err());
        assert!(parse_predictor_spec("fixed_bias:theta=x").is_err());
    }

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        assert_eq!(config.bias_grid_percent.len(), 11);
        assert_eq!(config.icl_counts, vec![0, 1, 3, 5, 10, 30, 50, 100]);
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>("{\"seed\":1,\"sede\":2}");
        assert!(err.is_err());
    }

    #[test]
    fn env_builds_reference_predictors() {
        let config = ExperimentConfig {
            predictors: vec![
                "exact_bayes".into(),
                "discounted_bayes:gamma=0.5".into(),
                "fixed_bias:0.7".into(),
                "miscalibrated_bayes:alpha=7,beta=3".into(),
            ],
            ..ExperimentConfig::default()
        };
        let env = Env::build(config).unwrap();
        assert_eq!(env.predictors.len(), 4);
        assert_eq!(env.space.len(), 2);
        assert_eq!(env.base_spec.total_len(), 100);
        assert_eq!(env.corpus.results().len(), 50);
    }

    #[test]
    fn bad_specs_are_config_errors() {
        for bad in [
            "nonexistent_kind",
            "discounted_bayes", // missing gamma
            "discounted_bayes:gamma=1.5",
            "fixed_bias:theta=1.5",
        ] {
            let config = ExperimentConfig {
                predictors: vec![bad.to_string()],
                ..ExperimentConfig::default()
            };
            assert!(
                matches!(Env::build(config), Err(CliError::Config(_))),
                "{bad} should be a config error"
            );
        }
    }

    #[test]
    fn custom_prior_flows_into_bayes_predictors() {
        let config = ExperimentConfig {
            predictors: vec!["exact_bayes".into()],
            prior: PriorConfig {
                alpha: 7.0,
                beta: 3.0,
                concentration: None,
            },
            ..ExperimentConfig::default()
        };
        let env = Env::build(config).unwrap();
        let ctx = coinfer_core::predictors::PredictorContext::fresh(&env.space);
        let d = env.predictors[0].predict(&ctx).unwrap();
        assert!((d.p_first() - 0.7).abs() < 1e-12);
    }
}
