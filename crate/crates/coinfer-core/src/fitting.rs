//! Fit the discount factor γ that best explains a prediction trace under the
//! discounted Bayesian filter.
//!
//! The objective is the per-step mean squared error between the trace's
//! P(heads) and the filter's posterior mean (both under the
//! predict-then-observe convention). Minimization is derivative-free and
//! deterministic: a coarse bracketing grid followed by golden-section
//! refinement inside the best bracket. Identical inputs produce bit-identical
//! results.

use core::fmt;

use crate::oracle::{BetaParams, DiscountedFilter, OracleError};
use crate::predictors::PredictionTrace;
use crate::trajectory::Trajectory;

/// Errors from γ-fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    /// Trace and trajectory lengths differ.
    LengthMismatch { trace: usize, trajectory: usize },
    /// The discounted Beta filter models two outcomes only.
    NotBinary { outcomes: usize },
    /// Bounds must satisfy 0 < lo < hi ≤ 1.
    BadBounds { lo: f64, hi: f64 },
    /// The objective is flat across the bracketing grid: the trace carries no
    /// information about γ, so no value is returned.
    NonIdentifiable { variation: f64 },
    /// Every trace in the pool is constant step to step. A constant trace
    /// carries no update signal, so any minimum of the objective would fit
    /// trajectory noise rather than predictor behavior; reported instead.
    ConstantTrace { variation: f64 },
    /// Nothing to fit.
    EmptyPool,
    /// Underlying filter failure.
    Oracle(OracleError),
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitError::LengthMismatch { trace, trajectory } => {
                write!(f, "trace has {trace} steps, trajectory has {trajectory}")
            }
            FitError::NotBinary { outcomes } => {
                write!(f, "gamma fitting requires a 2-outcome process, got {outcomes}")
            }
            FitError::BadBounds { lo, hi } => {
                write!(f, "bounds ({lo}, {hi}) must satisfy 0 < lo < hi <= 1")
            }
            FitError::NonIdentifiable { variation } => write!(
                f,
                "objective varies by only {variation:e} across the grid; \
                 gamma is not identifiable from this trace"
            ),
            FitError::ConstantTrace { variation } => write!(
                f,
                "trace is constant (step-to-step variation {variation:e}); \
                 gamma is not identifiable from a constant trace"
            ),
            FitError::EmptyPool => write!(f, "no trace/trajectory pairs provided"),
            FitError::Oracle(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FitError {}

impl From<OracleError> for FitError {
    fn from(e: OracleError) -> Self {
        FitError::Oracle(e)
    }
}

/// Search configuration for [`fit_gamma`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFitOptions {
    /// Inclusive search bounds. The lower bound stays above zero so the
    /// filter's shape parameters remain strictly positive.
    pub bounds: (f64, f64),
    /// Width of the final bracket around the minimizer.
    pub tol: f64,
    /// Number of coarse bracketing grid points.
    pub grid_points: usize,
    /// Objective variation below which the fit is reported non-identifiable.
    pub flat_eps: f64,
}

impl Default for GammaFitOptions {
    fn default() -> Self {
        Self {
            bounds: (1e-3, 1.0),
            tol: 1e-4,
            grid_points: 64,
            flat_eps: 1e-12,
        }
    }
}

impl GammaFitOptions {
    /// The bracketing grid: `grid_points` equally spaced values spanning the
    /// bounds inclusively.
    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let (lo, hi) = self.bounds;
        let n = self.grid_points;
        (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
    }
}

/// Result of a γ fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFitResult {
    /// The minimizing discount factor.
    pub gamma_star: f64,
    /// Objective at `gamma_star` (mean squared per-step error).
    pub objective_value: f64,
    /// Number of objective evaluations spent.
    pub evaluations: u64,
    /// Prior the filter was run with.
    pub prior: BetaParams,
    /// Whether the refinement bracket reached the requested tolerance.
    pub converged: bool,
}

/// Mean squared error between the trace's per-step P(heads) and the
/// discounted filter's posterior mean along `trajectory`.
///
/// The step-t filter mean conditions on observations 1..t−1 only, matching
/// the trace's predict-then-observe alignment.
pub fn gamma_objective(
    gamma: f64,
    trace: &PredictionTrace,
    trajectory: &Trajectory,
    prior: BetaParams,
) -> Result<f64, FitError> {
    check_pair(trace, trajectory)?;
    let mut filter = DiscountedFilter::new(prior, gamma)?;
    let mut sum = 0.0;
    for (t, &outcome) in trajectory.outcomes().iter().enumerate() {
        let diff = trace.p_first(t) - filter.mean();
        sum += diff * diff;
        filter = filter.step(outcome)?;
    }
    Ok(sum / trajectory.len() as f64)
}

fn check_pair(trace: &PredictionTrace, trajectory: &Trajectory) -> Result<(), FitError> {
    if trajectory.num_outcomes() != 2 {
        return Err(FitError::NotBinary {
            outcomes: trajectory.num_outcomes(),
        });
    }
    if trace.len() != trajectory.len() {
        return Err(FitError::LengthMismatch {
            trace: trace.len(),
            trajectory: trajectory.len(),
        });
    }
    for step in trace.steps() {
        if step.len() != 2 {
            return Err(FitError::NotBinary {
                outcomes: step.len(),
            });
        }
    }
    Ok(())
}

/// Fit γ for a single trace/trajectory pair. See [`fit_gamma_pooled`].
pub fn fit_gamma(
    trace: &PredictionTrace,
    trajectory: &Trajectory,
    prior: BetaParams,
    opts: GammaFitOptions,
) -> Result<GammaFitResult, FitError> {
    fit_gamma_pooled(&[(trace, trajectory)], prior, opts)
}

/// Fit one γ to a set of trace/trajectory pairs, minimizing the objective
/// averaged over the pool (one fit per predictor, pooled across
/// trajectories).
///
/// Deterministic bounded scalar minimization: evaluate the coarse grid,
/// reject flat objectives as non-identifiable, then refine inside the best
/// bracket by golden-section search until the bracket is narrower than
/// `opts.tol`.
pub fn fit_gamma_pooled(
    pairs: &[(&PredictionTrace, &Trajectory)],
    prior: BetaParams,
    opts: GammaFitOptions,
) -> Result<GammaFitResult, FitError> {
    if pairs.is_empty() {
        return Err(FitError::EmptyPool);
    }
    let (lo, hi) = opts.bounds;
    if !(lo > 0.0 && lo < hi && hi <= 1.0) || opts.grid_points < 3 {
        return Err(FitError::BadBounds { lo, hi });
    }
    for (trace, trajectory) in pairs {
        check_pair(trace, trajectory)?;
    }

    // Degeneracy check: constant traces cannot identify gamma.
    let mut trace_variation = 0.0f64;
    for (trace, _) in pairs {
        for step in trace.steps() {
            let d = (step.p_first() - trace.p_first(0)).abs();
            trace_variation = trace_variation.max(d);
        }
    }
    if trace_variation < opts.flat_eps {
        return Err(FitError::ConstantTrace {
            variation: trace_variation,
        });
    }

    let mut evaluations = 0u64;
    let mut objective = |gamma: f64| -> Result<f64, FitError> {
        evaluations += 1;
        let mut sum = 0.0;
        for (trace, trajectory) in pairs {
            sum += gamma_objective(gamma, trace, trajectory, prior)?;
        }
        Ok(sum / pairs.len() as f64)
    };

    // Bracketing stage.
    let grid: alloc::vec::Vec<f64> = opts.grid().collect();
    let mut values = alloc::vec::Vec::with_capacity(grid.len());
    for &g in &grid {
        values.push(objective(g)?);
    }
    let (mut best_i, mut best_v) = (0usize, values[0]);
    let (mut min_v, mut max_v) = (values[0], values[0]);
    for (i, &v) in values.iter().enumerate() {
        if v < best_v {
            best_i = i;
            best_v = v;
        }
        min_v = min_v.min(v);
        max_v = max_v.max(v);
    }
    if max_v - min_v < opts.flat_eps {
        return Err(FitError::NonIdentifiable {
            variation: max_v - min_v,
        });
    }

    // Refinement stage: golden-section inside the bracket around the best
    // grid point.
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(grid.len() - 1)];
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    let mut converged = false;
    for _ in 0..200 {
        if (b - a).abs() <= opts.tol {
            converged = true;
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = objective(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = objective(x2)?;
        }
    }

    // Best point seen: interior candidates against the grid incumbent.
    let (mut gamma_star, mut best) = (grid[best_i], best_v);
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if fx < best {
            gamma_star = x;
            best = fx;
        }
    }

    Ok(GammaFitResult {
        gamma_star,
        objective_value: best,
        evaluations,
        prior,
        converged,
    })
}
