//! Outcome probabilities from token-level log-probabilities, and
//! renormalization of raw probabilities over a fixed support.
//!
//! Linear renormalization preserves pairwise ratios and is the default
//! everywhere. Softmax renormalization is implemented only because of its
//! known failure mode: for uniformly small inputs it collapses toward the
//! uniform distribution regardless of the input ratios. See
//! [`renormalize_softmax`].

use alloc::vec::Vec;
use core::fmt;

use crate::dist::DiscreteDistribution;

/// Raw probabilities below this floor are clamped (at the log level) so the
/// linear renormalization stays finite. Clamps are counted, never silent.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Errors from probability construction and renormalization.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalizationError {
    /// A tokenized outcome with no tokens.
    EmptyTokenSequence,
    /// A per-token log-probability above 0 (probability above 1) or NaN.
    InvalidLogProb(f64),
    /// A raw probability outside [0, 1].
    InvalidRawProbability(f64),
    /// The model assigns no mass to any outcome of the support; reported,
    /// never replaced by a uniform fallback.
    AllZeroSupport,
    /// Fewer than two outcomes in the support.
    TooFewOutcomes(usize),
    /// A tokenized-outcome set with a missing, repeated, or out-of-range
    /// outcome index.
    OutcomeIndexMisaligned { index: usize, len: usize },
}

impl fmt::Display for NormalizationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizationError::EmptyTokenSequence => {
                write!(f, "tokenized outcome has no tokens")
            }
            NormalizationError::InvalidLogProb(v) => {
                write!(f, "token log-probability must be finite and <= 0, got {v}")
            }
            NormalizationError::InvalidRawProbability(v) => {
                write!(f, "raw probability must lie in [0, 1], got {v}")
            }
            NormalizationError::AllZeroSupport => {
                write!(f, "model assigns no mass to any outcome")
            }
            NormalizationError::TooFewOutcomes(n) => {
                write!(f, "support needs at least 2 outcomes, got {n}")
            }
            NormalizationError::OutcomeIndexMisaligned { index, len } => {
                write!(f, "outcome index {index} missing, repeated, or outside 0..{len}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NormalizationError {}

/// Per-token conditional log-probabilities of one outcome's token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedOutcome {
    outcome: usize,
    token_logprobs: Vec<f64>,
}

impl TokenizedOutcome {
    pub fn new(outcome: usize, token_logprobs: Vec<f64>) -> Result<Self, NormalizationError> {
        if token_logprobs.is_empty() {
            return Err(NormalizationError::EmptyTokenSequence);
        }
        for &lp in &token_logprobs {
            if lp.is_nan() || lp > 0.0 {
                return Err(NormalizationError::InvalidLogProb(lp));
            }
        }
        Ok(Self {
            outcome,
            token_logprobs,
        })
    }

    pub fn outcome(&self) -> usize {
        self.outcome
    }

    pub fn token_logprobs(&self) -> &[f64] {
        &self.token_logprobs
    }

    /// Total log mass of the token chain.
    pub fn total_logprob(&self) -> f64 {
        self.token_logprobs.iter().sum()
    }
}

/// Chain-rule probability of an outcome: exp of the summed token
/// log-probabilities. Invariant to how the chain is segmented into tokens.
pub fn outcome_probability(tok: &TokenizedOutcome) -> f64 {
    libm::exp(tok.total_logprob())
}

/// Raw per-outcome probabilities over a support; entries lie in [0, 1] but
/// need not sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct UnnormalizedSupport {
    raw: Vec<f64>,
}

impl UnnormalizedSupport {
    pub fn new(raw: Vec<f64>) -> Result<Self, NormalizationError> {
        if raw.len() < 2 {
            return Err(NormalizationError::TooFewOutcomes(raw.len()));
        }
        for &p in &raw {
            if !(0.0..=1.0).contains(&p) {
                return Err(NormalizationError::InvalidRawProbability(p));
            }
        }
        Ok(Self { raw })
    }

    /// Build the support from tokenized outcomes, index-aligned: entry `i`
    /// comes from the tokenized outcome with `outcome() == i`, and each
    /// outcome index must appear exactly once.
    ///
    /// Log masses below ln(1e-300) are clamped to the floor; the number of
    /// clamped outcomes is returned alongside so callers can surface it.
    pub fn from_token_logprobs(
        outcomes: &[TokenizedOutcome],
    ) -> Result<(Self, usize), NormalizationError> {
        if outcomes.len() < 2 {
            return Err(NormalizationError::TooFewOutcomes(outcomes.len()));
        }
        let ln_floor = libm::log(PROBABILITY_FLOOR);
        let mut raw = alloc::vec![f64::NAN; outcomes.len()];
        let mut clamped = 0;
        for tok in outcomes {
            if tok.outcome() >= raw.len() || !raw[tok.outcome()].is_nan() {
                return Err(NormalizationError::OutcomeIndexMisaligned {
                    index: tok.outcome(),
                    len: raw.len(),
                });
            }
            let lp = tok.total_logprob();
            let p = if lp < ln_floor {
                clamped += 1;
                PROBABILITY_FLOOR
            } else {
                libm::exp(lp)
            };
            raw[tok.outcome()] = p;
        }
        Ok((Self { raw }, clamped))
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Divide each entry by the sum; pairwise ratios are preserved exactly.
///
/// An all-zero support is a reported error, never a uniform fallback.
pub fn renormalize_linear(
    raw: &UnnormalizedSupport,
) -> Result<DiscreteDistribution, NormalizationError> {
    let sum: f64 = raw.raw.iter().sum();
    if sum <= 0.0 {
        return Err(NormalizationError::AllZeroSupport);
    }
    let probs: Vec<f64> = raw.raw.iter().map(|&p| p / sum).collect();
    Ok(DiscreteDistribution::new(probs).expect("linear renormalization sums to 1"))
}

/// Softmax over the raw probabilities: exp(pᵢ) / Σ exp(pⱼ).
///
/// Kept only to demonstrate its pathology: when every raw probability is
/// small, exp(pᵢ) ≈ 1 for all i and the output collapses to 1/|Ω| no matter
/// how the inputs were distributed. Experiments always use
/// [`renormalize_linear`].
pub fn renormalize_softmax(raw: &UnnormalizedSupport) -> DiscreteDistribution {
    // Shift by the max for numeric safety; raw entries are bounded anyway.
    let max = raw.raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.raw.iter().map(|&p| libm::exp(p - max)).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    DiscreteDistribution::new(probs).expect("softmax output sums to 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn chain_rule_product() {
        let tok = TokenizedOutcome::new(0, vec![-0.5, -1.0]).unwrap();
        assert!((outcome_probability(&tok) - libm::exp(-1.5)).abs() < 1e-15);
        let tok = TokenizedOutcome::new(0, vec![0.0]).unwrap();
        assert_eq!(outcome_probability(&tok), 1.0);
    }

    #[test]
    fn segmentation_invariance() {
        // Exactly representable parts: identical total log mass gives the
        // identical probability, bitwise.
        let one = TokenizedOutcome::new(0, vec![-1.75]).unwrap();
        let two = TokenizedOutcome::new(0, vec![-0.5, -1.25]).unwrap();
        assert_eq!(outcome_probability(&one), outcome_probability(&two));
        // Inexact splits still agree to round-off.
        let three = TokenizedOutcome::new(0, vec![-0.9, -0.85]).unwrap();
        assert!((outcome_probability(&three) - outcome_probability(&one)).abs() < 1e-15);
    }

    #[test]
    fn tokenized_outcome_validation() {
        assert!(matches!(
            TokenizedOutcome::new(0, vec![]),
            Err(NormalizationError::EmptyTokenSequence)
        ));
        assert!(matches!(
            TokenizedOutcome::new(0, vec![0.1]),
            Err(NormalizationError::InvalidLogProb(_))
        ));
        assert!(TokenizedOutcome::new(0, vec![f64::NEG_INFINITY]).is_ok());
    }

    #[test]
    fn linear_preserves_ratios() {
        let raw = UnnormalizedSupport::new(vec![0.02, 0.01, 0.01]).unwrap();
        let d = renormalize_linear(&raw).unwrap();
        assert_eq!(d.as_slice(), &[0.5, 0.25, 0.25]);

        // Already normalized input is unchanged.
        let raw = UnnormalizedSupport::new(vec![0.7, 0.3]).unwrap();
        let d = renormalize_linear(&raw).unwrap();
        assert!((d.prob(0) - 0.7).abs() < 1e-15);

        // Tiny values keep their 1000:1 ratio.
        let raw = UnnormalizedSupport::new(vec![1e-9, 1e-12]).unwrap();
        let d = renormalize_linear(&raw).unwrap();
        assert!((d.prob(0) - 1000.0 / 1001.0).abs() < 1e-9);
        assert!((d.prob(1) - 1.0 / 1001.0).abs() < 1e-9);
    }

    #[test]
    fn all_zero_support_is_an_error() {
        let raw = UnnormalizedSupport::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(
            renormalize_linear(&raw),
            Err(NormalizationError::AllZeroSupport)
        );
    }

    #[test]
    fn softmax_examples() {
        let raw = UnnormalizedSupport::new(vec![0.0, 0.0]).unwrap();
        let d = renormalize_softmax(&raw);
        assert_eq!(d.as_slice(), &[0.5, 0.5]);

        let raw = UnnormalizedSupport::new(vec![1.0, 0.0]).unwrap();
        let d = renormalize_softmax(&raw);
        let e = libm::exp(1.0);
        assert!((d.prob(0) - e / (e + 1.0)).abs() < 1e-12);
        assert!((d.prob(1) - 1.0 / (e + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn softmax_collapses_small_inputs_linear_does_not() {
        // The signature regression: identical input, opposite behavior.
        let raw = UnnormalizedSupport::new(vec![1e-9, 1e-12]).unwrap();

        let soft = renormalize_softmax(&raw);
        assert!((soft.prob(0) - 0.5).abs() < 1e-6);
        assert!((soft.prob(1) - 0.5).abs() < 1e-6);

        let lin = renormalize_linear(&raw).unwrap();
        assert!((lin.prob(0) / lin.prob(1) - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_uniform_limit_many_outcomes() {
        let raw = UnnormalizedSupport::new(vec![1e-7, 1e-9, 1e-8, 1e-10]).unwrap();
        let d = renormalize_softmax(&raw);
        for i in 0..4 {
            assert!((d.prob(i) - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn support_from_logprobs_clamps_and_counts() {
        let toks = vec![
            TokenizedOutcome::new(0, vec![-0.105]).unwrap(),
            TokenizedOutcome::new(1, vec![-800.0]).unwrap(), // below the floor
        ];
        let (support, clamped) = UnnormalizedSupport::from_token_logprobs(&toks).unwrap();
        assert_eq!(clamped, 1);
        assert_eq!(support.raw()[1], PROBABILITY_FLOOR);
        // Still renormalizable.
        let d = renormalize_linear(&support).unwrap();
        assert!(d.prob(0) > 0.999);
    }

    #[test]
    fn support_rejects_misaligned_outcome_indices() {
        let dup = vec![
            TokenizedOutcome::new(0, vec![-0.1]).unwrap(),
            TokenizedOutcome::new(0, vec![-0.2]).unwrap(),
        ];
        assert!(matches!(
            UnnormalizedSupport::from_token_logprobs(&dup),
            Err(NormalizationError::OutcomeIndexMisaligned { index: 0, .. })
        ));
        let out_of_range = vec![
            TokenizedOutcome::new(0, vec![-0.1]).unwrap(),
            TokenizedOutcome::new(5, vec![-0.2]).unwrap(),
        ];
        assert!(UnnormalizedSupport::from_token_logprobs(&out_of_range).is_err());
    }
}
