//! Exact Bayesian ground truth: conjugate Beta-Binomial and
//! Dirichlet-Multinomial updating, discounted filtering, and posterior
//! summaries.
//!
//! All state is value-semantic and every operation is a pure function, so
//! everything here is safe to use from any number of threads.

use alloc::vec::Vec;
use core::fmt;

use crate::dist::DiscreteDistribution;
use crate::special::{self, SpecialError};

/// Errors from conjugate updating and filtering.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    /// A shape parameter was non-positive, NaN, or infinite.
    InvalidShape { name: &'static str, value: f64 },
    /// Observation counts with k > n.
    CountsOutOfRange { k: u64, n: u64 },
    /// Discount factor outside (0, 1]. γ = 0 would erase the prior and let a
    /// shape parameter reach zero, so it is rejected rather than special-cased.
    InvalidGamma(f64),
    /// Evaluation point outside [0, 1].
    ThetaOutOfRange(f64),
    /// An outcome index not covered by the parameter vector.
    InvalidOutcome { index: usize, len: usize },
    /// Per-outcome count vector of the wrong length.
    DimensionMismatch { expected: usize, got: usize },
    /// The incomplete-beta continued fraction failed to converge.
    Numerics(SpecialError),
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::InvalidShape { name, value } => {
                write!(f, "shape parameter {name} must be positive and finite, got {value}")
            }
            OracleError::CountsOutOfRange { k, n } => {
                write!(f, "invalid counts: k={k} exceeds n={n}")
            }
            OracleError::InvalidGamma(g) => {
                write!(f, "discount factor must lie in (0, 1], got {g}")
            }
            OracleError::ThetaOutOfRange(t) => write!(f, "theta {t} outside [0, 1]"),
            OracleError::InvalidOutcome { index, len } => {
                write!(f, "outcome index {index} invalid for {len} outcomes")
            }
            OracleError::DimensionMismatch { expected, got } => {
                write!(f, "count vector has {got} entries, expected {expected}")
            }
            OracleError::Numerics(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for OracleError {}

impl From<SpecialError> for OracleError {
    fn from(e: SpecialError) -> Self {
        OracleError::Numerics(e)
    }
}

/// Heads/tails counts from a batch of flips. Guarantees 0 ≤ k ≤ n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationCounts {
    k: u64,
    n: u64,
}

impl ObservationCounts {
    /// `k` successes (heads) out of `n` trials.
    pub fn new(k: u64, n: u64) -> Result<Self, OracleError> {
        if k > n {
            return Err(OracleError::CountsOutOfRange { k, n });
        }
        Ok(Self { k, n })
    }

    /// Count first-outcome occurrences in a slice of outcome indices.
    pub fn from_outcomes(outcomes: &[usize]) -> Self {
        let k = outcomes.iter().filter(|&&o| o == 0).count() as u64;
        Self {
            k,
            n: outcomes.len() as u64,
        }
    }

    pub fn successes(&self) -> u64 {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.n
    }
}

/// Parameters of a Beta distribution; the conjugate state for Bernoulli and
/// Binomial observations. Both shapes stay strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, OracleError> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(OracleError::InvalidShape {
                name: "alpha",
                value: alpha,
            });
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(OracleError::InvalidShape {
                name: "beta",
                value: beta,
            });
        }
        Ok(Self { alpha, beta })
    }

    /// The uniform prior Beta(1, 1).
    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Batch conjugate update: Beta(α, β) + (k, n) → Beta(α+k, β+n−k).
    ///
    /// Pure integer-shift arithmetic; no rounding beyond the floating
    /// representation of the result.
    pub fn update(&self, counts: ObservationCounts) -> BetaParams {
        BetaParams {
            alpha: self.alpha + counts.k as f64,
            beta: self.beta + (counts.n - counts.k) as f64,
        }
    }

    /// Posterior mean α / (α + β).
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Density at `theta`, computed in log space.
    ///
    /// At a boundary where the density diverges (α < 1 at θ = 0, or β < 1 at
    /// θ = 1) this returns `f64::INFINITY`, never NaN.
    pub fn pdf(&self, theta: f64) -> Result<f64, OracleError> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(OracleError::ThetaOutOfRange(theta));
        }
        let ln_norm = special::ln_beta(self.alpha, self.beta);
        if theta == 0.0 {
            return Ok(match () {
                _ if self.alpha < 1.0 => f64::INFINITY,
                _ if self.alpha == 1.0 => libm::exp(-ln_norm),
                _ => 0.0,
            });
        }
        if theta == 1.0 {
            return Ok(match () {
                _ if self.beta < 1.0 => f64::INFINITY,
                _ if self.beta == 1.0 => libm::exp(-ln_norm),
                _ => 0.0,
            });
        }
        let ln_pdf = (self.alpha - 1.0) * libm::log(theta)
            + (self.beta - 1.0) * libm::log1p(-theta)
            - ln_norm;
        Ok(libm::exp(ln_pdf))
    }

    /// CDF at `theta`: the regularized incomplete beta function I_θ(α, β).
    pub fn cdf(&self, theta: f64) -> Result<f64, OracleError> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(OracleError::ThetaOutOfRange(theta));
        }
        Ok(special::reg_inc_beta(self.alpha, self.beta, theta)?)
    }

    /// Log marginal likelihood of observing `counts` under this prior:
    /// ln [ C(n,k) · B(α+k, β+n−k) / B(α,β) ].
    pub fn log_marginal(&self, counts: ObservationCounts) -> f64 {
        let post = self.update(counts);
        special::ln_choose(counts.n, counts.k) + special::ln_beta(post.alpha, post.beta)
            - special::ln_beta(self.alpha, self.beta)
    }

    /// Posterior-predictive distribution over (heads, tails).
    pub fn predictive(&self) -> DiscreteDistribution {
        let m = self.mean();
        DiscreteDistribution::bernoulli(m).expect("mean of valid params lies in (0,1)")
    }
}

/// Discounted Beta filter: before each observation the pseudo-counts decay
/// by γ, so old evidence is forgotten exponentially. γ = 1 recovers classical
/// conjugate filtering exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedFilter {
    params: BetaParams,
    gamma: f64,
}

impl DiscountedFilter {
    pub fn new(prior: BetaParams, gamma: f64) -> Result<Self, OracleError> {
        if gamma.is_nan() || gamma <= 0.0 || gamma > 1.0 {
            return Err(OracleError::InvalidGamma(gamma));
        }
        Ok(Self {
            params: prior,
            gamma,
        })
    }

    pub fn params(&self) -> BetaParams {
        self.params
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Current posterior mean.
    pub fn mean(&self) -> f64 {
        self.params.mean()
    }

    /// One filtering step: decay and increment applied atomically.
    /// `outcome` 0 counts toward α (heads), 1 toward β (tails).
    ///
    /// α' = γα + [outcome = 0], β' = γβ + [outcome = 1].
    pub fn step(self, outcome: usize) -> Result<Self, OracleError> {
        if outcome >= 2 {
            return Err(OracleError::InvalidOutcome {
                index: outcome,
                len: 2,
            });
        }
        let heads = (outcome == 0) as u64 as f64;
        Ok(Self {
            params: BetaParams {
                alpha: self.gamma * self.params.alpha + heads,
                beta: self.gamma * self.params.beta + (1.0 - heads),
            },
            gamma: self.gamma,
        })
    }
}

/// Concentration parameters of a Dirichlet distribution: the conjugate state
/// for categorical observations over K ≥ 2 outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    concentration: Vec<f64>,
}

impl DirichletParams {
    pub fn new(concentration: Vec<f64>) -> Result<Self, OracleError> {
        if concentration.len() < 2 {
            return Err(OracleError::DimensionMismatch {
                expected: 2,
                got: concentration.len(),
            });
        }
        for &c in &concentration {
            if !c.is_finite() || c <= 0.0 {
                return Err(OracleError::InvalidShape {
                    name: "concentration",
                    value: c,
                });
            }
        }
        Ok(Self { concentration })
    }

    /// The uniform prior Dir(1, …, 1) over `n` outcomes.
    pub fn uniform(n: usize) -> Result<Self, OracleError> {
        Self::new(alloc::vec![1.0; n])
    }

    pub fn concentration(&self) -> &[f64] {
        &self.concentration
    }

    pub fn len(&self) -> usize {
        self.concentration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concentration.is_empty()
    }

    /// Conjugate update: concentrationᵢ' = concentrationᵢ + countᵢ.
    pub fn update(&self, counts: &[u64]) -> Result<DirichletParams, OracleError> {
        if counts.len() != self.concentration.len() {
            return Err(OracleError::DimensionMismatch {
                expected: self.concentration.len(),
                got: counts.len(),
            });
        }
        let concentration = self
            .concentration
            .iter()
            .zip(counts)
            .map(|(&c, &k)| c + k as f64)
            .collect();
        Ok(DirichletParams { concentration })
    }

    /// Posterior-predictive distribution: the normalized concentration vector.
    pub fn predictive(&self) -> DiscreteDistribution {
        let total: f64 = self.concentration.iter().sum();
        let probs = self.concentration.iter().map(|&c| c / total).collect();
        DiscreteDistribution::new(probs).expect("normalized concentrations form a distribution")
    }
}

/// Discounted Dirichlet filter, the K-outcome analogue of
/// [`DiscountedFilter`]: every concentration decays by γ and the observed
/// outcome's entry is incremented by one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedDirichletFilter {
    params: DirichletParams,
    gamma: f64,
}

impl DiscountedDirichletFilter {
    pub fn new(prior: DirichletParams, gamma: f64) -> Result<Self, OracleError> {
        if gamma.is_nan() || gamma <= 0.0 || gamma > 1.0 {
            return Err(OracleError::InvalidGamma(gamma));
        }
        Ok(Self {
            params: prior,
            gamma,
        })
    }

    pub fn params(&self) -> &DirichletParams {
        &self.params
    }

    pub fn predictive(&self) -> DiscreteDistribution {
        self.params.predictive()
    }

    pub fn step(mut self, outcome: usize) -> Result<Self, OracleError> {
        let len = self.params.concentration.len();
        if outcome >= len {
            return Err(OracleError::InvalidOutcome {
                index: outcome,
                len,
            });
        }
        for c in &mut self.params.concentration {
            *c *= self.gamma;
        }
        self.params.concentration[outcome] += 1.0;
        Ok(self)
    }
}
