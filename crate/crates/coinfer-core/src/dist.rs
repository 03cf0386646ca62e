//! Normalized probability vectors over a fixed, ordered outcome support.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Tolerance on Σp = 1 accepted by [`DiscreteDistribution::new`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Errors from building or combining distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum DistError {
    /// Fewer than two outcomes.
    TooFewOutcomes(usize),
    /// A negative, NaN, or infinite entry.
    InvalidEntry { index: usize, value: f64 },
    /// Entries do not sum to 1 within [`NORMALIZATION_TOL`].
    NotNormalized { sum: f64 },
    /// A probability parameter outside [0, 1].
    ProbabilityOutOfRange(f64),
}

impl fmt::Display for DistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistError::TooFewOutcomes(n) => {
                write!(f, "distribution needs at least 2 outcomes, got {n}")
            }
            DistError::InvalidEntry { index, value } => {
                write!(f, "invalid probability at index {index}: {value}")
            }
            DistError::NotNormalized { sum } => {
                write!(f, "probabilities sum to {sum}, expected 1")
            }
            DistError::ProbabilityOutOfRange(p) => {
                write!(f, "probability {p} outside [0, 1]")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DistError {}

/// A normalized probability vector, index-aligned with an
/// [`OutcomeSpace`](crate::trajectory::OutcomeSpace).
///
/// Entries are non-negative and sum to 1 within [`NORMALIZATION_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Build from already-normalized probabilities.
    pub fn new(probs: Vec<f64>) -> Result<Self, DistError> {
        if probs.len() < 2 {
            return Err(DistError::TooFewOutcomes(probs.len()));
        }
        let mut sum = 0.0;
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(DistError::InvalidEntry { index, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DistError::NotNormalized { sum });
        }
        Ok(Self { probs })
    }

    /// Two-outcome distribution (p, 1-p) with p the first-outcome probability.
    pub fn bernoulli(p: f64) -> Result<Self, DistError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DistError::ProbabilityOutOfRange(p));
        }
        Ok(Self {
            probs: vec![p, 1.0 - p],
        })
    }

    /// Uniform distribution over `n` outcomes.
    pub fn uniform(n: usize) -> Result<Self, DistError> {
        if n < 2 {
            return Err(DistError::TooFewOutcomes(n));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Probability of outcome `index`.
    #[inline]
    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    /// Probability of the first outcome ("heads" for a coin space).
    #[inline]
    pub fn p_first(&self) -> f64 {
        self.probs[0]
    }

    /// Number of outcomes.
    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    /// Always false by construction; provided for slice-like ergonomics.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// The underlying probability slice.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}
