//! Conjugate Bayesian filtering and predictive-distribution evaluation for
//! discrete stochastic processes (coin flips, die rolls).
//!
//! The crate provides the pieces needed to score any sequential predictor
//! against exact Bayesian ground truth:
//!
//! - [`oracle`] — Beta-Binomial and Dirichlet-Multinomial conjugate updates,
//!   discounted (exponentially forgetting) filtering, and the special-function
//!   numerics behind posterior densities and CDFs.
//! - [`trajectory`] — seeded, reproducible generation of stationary and
//!   changepoint outcome sequences.
//! - [`normalization`] — outcome probabilities from token-level
//!   log-probabilities and renormalization over a fixed support.
//! - [`predictors`] — the `Predictor` trait plus synthetic reference
//!   predictors (exact Bayes, discounted Bayes, fixed bias, miscalibrated
//!   priors) that make the evaluation pipeline verifiable offline.
//! - [`prompt`] — prompt corpora and deterministic rendering of biasing
//!   statements and in-context example chains.
//! - [`fitting`] — bounded scalar minimization that recovers the discount
//!   factor best explaining a prediction trace.
//! - [`metrics`] — total variation distance, posterior-CDF extremity,
//!   Pearson correlation with exact t-distribution p-values, and grouped
//!   aggregation.
//!
//! All floating-point transcendentals route through `libm`, so results are
//! bit-reproducible across platforms and identical between `std` and
//! `no_std` builds. The crate is `no_std`-compatible (requires `alloc`).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dist;
pub mod fitting;
pub mod metrics;
pub mod normalization;
pub mod oracle;
pub mod predictors;
pub mod prompt;
pub mod special;
pub mod trajectory;

pub use dist::DiscreteDistribution;
pub use oracle::{BetaParams, DirichletParams, DiscountedFilter, ObservationCounts};
pub use trajectory::{ChangepointSpec, OutcomeSpace, SegmentSpec, Trajectory};

/// Identifier of the pseudo-random scheme used for trajectory generation,
/// recorded in run metadata so outputs stay attributable and reproducible.
pub const RNG_ALGORITHM: &str = "chacha8+splitmix64-v1";
