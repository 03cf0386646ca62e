//! The predictor abstraction every experiment consumes, plus the synthetic
//! reference predictors that make the whole pipeline verifiable offline.
//!
//! A predictor maps a context (outcome space, optional biasing value, and an
//! in-context history) to a normalized distribution over the next outcome.
//! The prediction for step t conditions on observations 1..t−1 only
//! (predict-then-observe), so the step-1 prediction is the pure prior.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::dist::DiscreteDistribution;
use crate::oracle::{BetaParams, DirichletParams, DiscountedDirichletFilter, OracleError};
use crate::trajectory::{OutcomeSpace, Trajectory};

/// Errors from prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictError {
    /// History contains an outcome index outside the space.
    InvalidHistory { index: usize, len: usize },
    /// Biasing value outside [0, 1].
    InvalidBias(f64),
    /// Predictor parameters inconsistent with the context's outcome space.
    SpaceMismatch { predictor: usize, context: usize },
    /// Unknown reference-predictor kind.
    UnknownKind(String),
    /// Missing or invalid parameter for a reference-predictor kind.
    BadParams(String),
    /// A remote provider failed; the request metadata travels with the error.
    Provider { predictor: String, detail: String },
    /// Underlying conjugate-update failure.
    Oracle(OracleError),
}

impl fmt::Display for PredictError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictError::InvalidHistory { index, len } => {
                write!(f, "history outcome {index} invalid for {len} outcomes")
            }
            PredictError::InvalidBias(b) => write!(f, "bias {b} outside [0, 1]"),
            PredictError::SpaceMismatch { predictor, context } => write!(
                f,
                "predictor is parameterized for {predictor} outcomes, context has {context}"
            ),
            PredictError::UnknownKind(k) => write!(f, "unknown predictor kind {k:?}"),
            PredictError::BadParams(msg) => write!(f, "bad predictor parameters: {msg}"),
            PredictError::Provider { predictor, detail } => {
                write!(f, "provider failure in {predictor}: {detail}")
            }
            PredictError::Oracle(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PredictError {}

impl From<OracleError> for PredictError {
    fn from(e: OracleError) -> Self {
        PredictError::Oracle(e)
    }
}

/// Everything a predictor may condition on for a single prediction.
#[derive(Debug, Clone)]
pub struct PredictorContext<'a> {
    /// The outcome support.
    pub space: &'a OutcomeSpace,
    /// Index into the result-prompt corpus.
    pub template_id: usize,
    /// Explicit biasing value for the first outcome, if the prompt should
    /// carry a biasing statement.
    pub bias: Option<f64>,
    /// In-context history: outcome indices observed so far, oldest first.
    pub history: &'a [usize],
    /// Whether to render through the instruct (chat) path.
    pub instruct: bool,
}

impl<'a> PredictorContext<'a> {
    /// A context with no bias and no history.
    pub fn fresh(space: &'a OutcomeSpace) -> Self {
        Self {
            space,
            template_id: 0,
            bias: None,
            history: &[],
            instruct: false,
        }
    }

    /// Validate history indices and bias range.
    pub fn validate(&self) -> Result<(), PredictError> {
        for &o in self.history {
            if o >= self.space.len() {
                return Err(PredictError::InvalidHistory {
                    index: o,
                    len: self.space.len(),
                });
            }
        }
        if let Some(b) = self.bias {
            if !(0.0..=1.0).contains(&b) {
                return Err(PredictError::InvalidBias(b));
            }
        }
        Ok(())
    }
}

/// A sequential predictor over a discrete outcome space.
///
/// Implementations must be deterministic given an identical context; remote
/// predictors achieve this through a replay cache.
pub trait Predictor: Send + Sync {
    /// Stable identifier used in run records and report tables.
    fn id(&self) -> &str;

    /// Predictive distribution over the context's outcome space.
    fn predict(&self, context: &PredictorContext<'_>) -> Result<DiscreteDistribution, PredictError>;
}

/// Exact conjugate Bayesian predictor: posterior-predictive distribution of
/// a Dirichlet (Beta, for coins) prior updated on the full history.
pub struct ExactBayes {
    id: String,
    prior: DirichletParams,
}

impl ExactBayes {
    pub fn new(prior: DirichletParams) -> Self {
        Self {
            id: "exact_bayes".to_string(),
            prior,
        }
    }

    /// Coin prior from Beta parameters (heads is index 0).
    pub fn from_beta(prior: BetaParams) -> Self {
        Self::new(
            DirichletParams::new(alloc::vec![prior.alpha(), prior.beta()])
                .expect("two positive concentrations"),
        )
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

impl Predictor for ExactBayes {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, ctx: &PredictorContext<'_>) -> Result<DiscreteDistribution, PredictError> {
        ctx.validate()?;
        if self.prior.len() != ctx.space.len() {
            return Err(PredictError::SpaceMismatch {
                predictor: self.prior.len(),
                context: ctx.space.len(),
            });
        }
        let mut counts = alloc::vec![0u64; self.prior.len()];
        for &o in ctx.history {
            counts[o] += 1;
        }
        Ok(self.prior.update(&counts)?.predictive())
    }
}

/// Discounted Bayesian predictor: folds the discounted filter over the
/// history and reports its posterior-predictive distribution. γ = 1 is
/// exactly [`ExactBayes`].
pub struct DiscountedBayes {
    id: String,
    prior: DirichletParams,
    gamma: f64,
}

impl DiscountedBayes {
    pub fn new(prior: DirichletParams, gamma: f64) -> Result<Self, PredictError> {
        // Validate once here; the per-call filter construction cannot fail after.
        DiscountedDirichletFilter::new(prior.clone(), gamma)?;
        Ok(Self {
            id: "discounted_bayes".to_string(),
            prior,
            gamma,
        })
    }

    pub fn from_beta(prior: BetaParams, gamma: f64) -> Result<Self, PredictError> {
        Self::new(
            DirichletParams::new(alloc::vec![prior.alpha(), prior.beta()])
                .expect("two positive concentrations"),
            gamma,
        )
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Predictor for DiscountedBayes {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, ctx: &PredictorContext<'_>) -> Result<DiscreteDistribution, PredictError> {
        ctx.validate()?;
        if self.prior.len() != ctx.space.len() {
            return Err(PredictError::SpaceMismatch {
                predictor: self.prior.len(),
                context: ctx.space.len(),
            });
        }
        let mut filter = DiscountedDirichletFilter::new(self.prior.clone(), self.gamma)?;
        for &o in ctx.history {
            filter = filter.step(o)?;
        }
        Ok(filter.predictive())
    }
}

/// Constant predictor that ignores both bias statements and history; the
/// synthetic twin of a model that always produces the same outcome split.
pub struct FixedBias {
    id: String,
    dist: DiscreteDistribution,
}

impl FixedBias {
    pub fn new(dist: DiscreteDistribution) -> Self {
        Self {
            id: "fixed_bias".to_string(),
            dist,
        }
    }

    /// Coin shorthand: (p, 1−p) with `p_first` on heads.
    pub fn coin(p_first: f64) -> Result<Self, PredictError> {
        let dist = DiscreteDistribution::bernoulli(p_first)
            .map_err(|_| PredictError::InvalidBias(p_first))?;
        Ok(Self::new(dist))
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

impl Predictor for FixedBias {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, ctx: &PredictorContext<'_>) -> Result<DiscreteDistribution, PredictError> {
        ctx.validate()?;
        if self.dist.len() != ctx.space.len() {
            return Err(PredictError::SpaceMismatch {
                predictor: self.dist.len(),
                context: ctx.space.len(),
            });
        }
        Ok(self.dist.clone())
    }
}

/// Parameters accepted by [`make_reference_predictor`]. Unused fields are
/// ignored by kinds that do not need them.
#[derive(Debug, Clone, Default)]
pub struct ReferenceParams {
    /// Prior concentrations (α, β for coins). Defaults to all-ones.
    pub prior: Option<Vec<f64>>,
    /// Discount factor for `discounted_bayes`.
    pub gamma: Option<f64>,
    /// First-outcome probability for `fixed_bias`.
    pub theta: Option<f64>,
    /// Number of outcomes when no explicit prior is given (default 2).
    pub num_outcomes: Option<usize>,
}

/// Build a synthetic reference predictor by kind name.
///
/// Kinds: `exact_bayes`, `discounted_bayes` (requires `gamma`),
/// `fixed_bias` (requires `theta`), and `miscalibrated_bayes` (an exact
/// Bayes predictor whose non-uniform prior must be given explicitly).
pub fn make_reference_predictor(
    kind: &str,
    params: &ReferenceParams,
) -> Result<Box<dyn Predictor>, PredictError> {
    let arity = params
        .prior
        .as_ref()
        .map(Vec::len)
        .or(params.num_outcomes)
        .unwrap_or(2);
    let prior = || -> Result<DirichletParams, PredictError> {
        match &params.prior {
            Some(c) => Ok(DirichletParams::new(c.clone())?),
            None => Ok(DirichletParams::uniform(arity)?),
        }
    };
    match kind {
        "exact_bayes" => Ok(Box::new(ExactBayes::new(prior()?))),
        "miscalibrated_bayes" => {
            let p = params
                .prior
                .as_ref()
                .ok_or_else(|| PredictError::BadParams("miscalibrated_bayes needs a prior".to_string()))?;
            Ok(Box::new(
                ExactBayes::new(DirichletParams::new(p.clone())?).with_id("miscalibrated_bayes"),
            ))
        }
        "discounted_bayes" => {
            let gamma = params
                .gamma
                .ok_or_else(|| PredictError::BadParams("discounted_bayes needs gamma".to_string()))?;
            Ok(Box::new(DiscountedBayes::new(prior()?, gamma)?))
        }
        "fixed_bias" => {
            let theta = params
                .theta
                .ok_or_else(|| PredictError::BadParams("fixed_bias needs theta".to_string()))?;
            Ok(Box::new(FixedBias::coin(theta)?))
        }
        other => Err(PredictError::UnknownKind(other.to_string())),
    }
}

/// Per-step predictive distributions aligned to a trajectory: entry t is the
/// prediction made before observing outcome t.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrace {
    predictor_id: String,
    steps: Vec<DiscreteDistribution>,
}

impl PredictionTrace {
    pub fn new(predictor_id: impl Into<String>, steps: Vec<DiscreteDistribution>) -> Self {
        Self {
            predictor_id: predictor_id.into(),
            steps,
        }
    }

    pub fn predictor_id(&self) -> &str {
        &self.predictor_id
    }

    pub fn steps(&self) -> &[DiscreteDistribution] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// First-outcome probability at 0-based step t.
    pub fn p_first(&self, t: usize) -> f64 {
        self.steps[t].p_first()
    }
}

/// Run a predictor along a trajectory, collecting the prediction made before
/// each observation.
pub fn trace_predictor(
    predictor: &dyn Predictor,
    trajectory: &Trajectory,
    space: &OutcomeSpace,
) -> Result<PredictionTrace, PredictError> {
    let outcomes = trajectory.outcomes();
    let mut steps = Vec::with_capacity(outcomes.len());
    for t in 0..outcomes.len() {
        let ctx = PredictorContext {
            space,
            template_id: 0,
            bias: None,
            history: &outcomes[..t],
            instruct: false,
        };
        steps.push(predictor.predict(&ctx)?);
    }
    Ok(PredictionTrace::new(predictor.id(), steps))
}
