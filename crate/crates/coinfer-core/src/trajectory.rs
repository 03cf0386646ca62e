//! Seeded, reproducible generation of biased and changepoint outcome
//! sequences, plus empirical summaries over them.
//!
//! Sampling is fully determined by `(spec, seed)`. Per-trial substreams are
//! derived with [`child_seed`], so parallel experiment runs are
//! order-independent. The generator is ChaCha8 seeded through a SplitMix64
//! mix (see [`crate::RNG_ALGORITHM`]).

use alloc::string::String;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::DiscreteDistribution;

/// Errors from space construction and trajectory operations.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryError {
    /// Fewer than two outcome labels.
    TooFewLabels(usize),
    /// Two labels with identical text.
    DuplicateLabel(String),
    /// A segment of length zero.
    EmptySegment,
    /// Segment distribution arity differs from the outcome space.
    SpaceMismatch { space: usize, dist: usize },
    /// A spec with no segments.
    NoSegments,
    /// Index range outside the trajectory.
    RangeOutOfBounds { start: usize, end: usize, len: usize },
    /// A serialized label not present in the outcome space.
    UnknownLabel(String),
}

impl fmt::Display for TrajectoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajectoryError::TooFewLabels(n) => {
                write!(f, "outcome space needs at least 2 labels, got {n}")
            }
            TrajectoryError::DuplicateLabel(l) => write!(f, "duplicate outcome label {l:?}"),
            TrajectoryError::EmptySegment => write!(f, "segment length must be at least 1"),
            TrajectoryError::SpaceMismatch { space, dist } => {
                write!(f, "segment distribution has {dist} outcomes, space has {space}")
            }
            TrajectoryError::NoSegments => write!(f, "changepoint spec has no segments"),
            TrajectoryError::RangeOutOfBounds { start, end, len } => {
                write!(f, "range {start}..{end} outside trajectory of length {len}")
            }
            TrajectoryError::UnknownLabel(l) => write!(f, "unknown outcome label {l:?}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TrajectoryError {}

/// Ordered, distinct outcome labels; index order is the canonical order of
/// every probability vector in the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    pub fn new(labels: Vec<String>) -> Result<Self, TrajectoryError> {
        if labels.len() < 2 {
            return Err(TrajectoryError::TooFewLabels(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(TrajectoryError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// The coin space: heads (index 0) and tails (index 1).
    pub fn coin() -> Self {
        Self {
            labels: alloc::vec!["heads".to_string(), "tails".to_string()],
        }
    }

    /// A six-sided die with faces "1" through "6".
    pub fn die() -> Self {
        Self {
            labels: (1..=6).map(|i| i.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One i.i.d. stretch of a generating process: `length` draws from `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpec {
    length: usize,
    theta: DiscreteDistribution,
}

impl SegmentSpec {
    pub fn new(length: usize, theta: DiscreteDistribution) -> Result<Self, TrajectoryError> {
        if length == 0 {
            return Err(TrajectoryError::EmptySegment);
        }
        Ok(Self { length, theta })
    }

    /// Coin segment with P(heads) = `theta`.
    pub fn coin(length: usize, theta: f64) -> Result<Self, TrajectoryError> {
        let dist = DiscreteDistribution::bernoulli(theta)
            .map_err(|_| TrajectoryError::EmptySegment)?;
        Self::new(length, dist)
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn theta(&self) -> &DiscreteDistribution {
        &self.theta
    }
}

/// An ordered list of segments; switchover indices are the cumulative
/// segment lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangepointSpec {
    segments: Vec<SegmentSpec>,
}

impl ChangepointSpec {
    pub fn new(segments: Vec<SegmentSpec>) -> Result<Self, TrajectoryError> {
        if segments.is_empty() {
            return Err(TrajectoryError::NoSegments);
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[SegmentSpec] {
        &self.segments
    }

    /// Total number of steps N = Σ segment lengths.
    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Cumulative switchover indices, one per segment boundary (excludes 0
    /// and includes N). With two segments this is `[K, N]`.
    pub fn switch_points(&self) -> Vec<usize> {
        let mut acc = 0;
        self.segments
            .iter()
            .map(|s| {
                acc += s.length;
                acc
            })
            .collect()
    }

    /// The generating distribution in force at 0-based step `index`.
    pub fn theta_at(&self, index: usize) -> Option<&DiscreteDistribution> {
        let mut acc = 0;
        for seg in &self.segments {
            acc += seg.length;
            if index < acc {
                return Some(&seg.theta);
            }
        }
        None
    }
}

/// The default two-segment changepoint process: 50 steps at θ₁ = 0.75
/// followed by 50 steps at θ₂ = 0.25 (N = 100, switchover K = 50).
pub fn default_changepoint() -> ChangepointSpec {
    ChangepointSpec::new(alloc::vec![
        SegmentSpec::coin(50, 0.75).expect("valid segment"),
        SegmentSpec::coin(50, 0.25).expect("valid segment"),
    ])
    .expect("two segments")
}

/// A sampled outcome sequence together with everything needed to regenerate
/// it: the generating spec and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    outcomes: Vec<usize>,
    spec: ChangepointSpec,
    seed: u64,
    num_outcomes: usize,
}

impl Trajectory {
    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn spec(&self) -> &ChangepointSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Arity of the outcome space this trajectory was sampled over.
    pub fn num_outcomes(&self) -> usize {
        self.num_outcomes
    }

    /// One outcome label per line, for the line-oriented text format.
    pub fn to_label_lines(&self, space: &OutcomeSpace) -> String {
        let mut out = String::new();
        for &o in &self.outcomes {
            out.push_str(space.label(o));
            out.push('\n');
        }
        out
    }
}

/// Parse the line-oriented label format back into outcome indices.
pub fn parse_label_lines(text: &str, space: &OutcomeSpace) -> Result<Vec<usize>, TrajectoryError> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            space
                .index_of(l)
                .ok_or_else(|| TrajectoryError::UnknownLabel(l.to_string()))
        })
        .collect()
}

/// Derive a child seed for trial `index` from a root seed.
///
/// SplitMix64 finalizer over `root ⊕ (index+1)·φ64`; documented so runs can
/// be reproduced outside this crate.
pub fn child_seed(root: u64, index: u64) -> u64 {
    let mut z = root ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw one outcome index from `dist` by inverse CDF.
fn draw(dist: &DiscreteDistribution, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in dist.as_slice().iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.len() - 1
}

/// Sample a trajectory: i.i.d. draws within each segment from its theta,
/// fully determined by `(spec, seed)`.
pub fn sample_trajectory(
    spec: &ChangepointSpec,
    space: &OutcomeSpace,
    seed: u64,
) -> Result<Trajectory, TrajectoryError> {
    for seg in spec.segments() {
        if seg.theta().len() != space.len() {
            return Err(TrajectoryError::SpaceMismatch {
                space: space.len(),
                dist: seg.theta().len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::with_capacity(spec.total_len());
    for seg in spec.segments() {
        for _ in 0..seg.length() {
            outcomes.push(draw(seg.theta(), &mut rng));
        }
    }
    Ok(Trajectory {
        outcomes,
        spec: spec.clone(),
        seed,
        num_outcomes: space.len(),
    })
}

/// Sample `len` i.i.d. outcomes from `dist` (a stationary history, e.g. the
/// in-context examples for one trial). `len` = 0 yields an empty sequence.
pub fn sample_stationary(
    dist: &DiscreteDistribution,
    len: usize,
    seed: u64,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| draw(dist, &mut rng)).collect()
}

/// Exact per-outcome counts over `range` of the trajectory.
pub fn empirical_counts(
    trajectory: &Trajectory,
    range: Range<usize>,
) -> Result<Vec<u64>, TrajectoryError> {
    if range.start > range.end || range.end > trajectory.len() {
        return Err(TrajectoryError::RangeOutOfBounds {
            start: range.start,
            end: range.end,
            len: trajectory.len(),
        });
    }
    let mut counts = alloc::vec![0u64; trajectory.num_outcomes];
    for &o in &trajectory.outcomes[range] {
        counts[o] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn space_validation() {
        assert!(OutcomeSpace::new(vec!["a".to_string()]).is_err());
        assert!(OutcomeSpace::new(vec!["a".to_string(), "a".to_string()]).is_err());
        let coin = OutcomeSpace::coin();
        assert_eq!(coin.label(0), "heads");
        assert_eq!(coin.index_of("tails"), Some(1));
        assert_eq!(OutcomeSpace::die().len(), 6);
    }

    #[test]
    fn degenerate_segment_is_deterministic() {
        let spec = ChangepointSpec::new(vec![SegmentSpec::coin(5, 1.0).unwrap()]).unwrap();
        let t = sample_trajectory(&spec, &OutcomeSpace::coin(), 7).unwrap();
        assert_eq!(t.outcomes(), &[0, 0, 0, 0, 0]);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let spec = default_changepoint();
        let a = sample_trajectory(&spec, &OutcomeSpace::coin(), 1234).unwrap();
        let b = sample_trajectory(&spec, &OutcomeSpace::coin(), 1234).unwrap();
        assert_eq!(a, b);
        let c = sample_trajectory(&spec, &OutcomeSpace::coin(), 1235).unwrap();
        assert_ne!(a.outcomes(), c.outcomes());
    }

    #[test]
    fn default_spec_shape() {
        let spec = default_changepoint();
        assert_eq!(spec.total_len(), 100);
        assert_eq!(spec.switch_points(), vec![50, 100]);
        assert!((spec.segments()[0].theta().p_first() - 0.75).abs() < 1e-15);
        assert!((spec.segments()[1].theta().p_first() - 0.25).abs() < 1e-15);
        assert!((spec.theta_at(49).unwrap().p_first() - 0.75).abs() < 1e-15);
        assert!((spec.theta_at(50).unwrap().p_first() - 0.25).abs() < 1e-15);
        assert!(spec.theta_at(100).is_none());
    }

    #[test]
    fn first_segment_frequency_within_99pct_interval() {
        // 99% binomial interval for 50 draws at 0.75: 0.75 ± 2.576·√(p(1-p)/50).
        let half_width = 2.576 * (0.75f64 * 0.25 / 50.0).sqrt();
        let spec = default_changepoint();
        let mut misses = 0;
        for seed in 0..100u64 {
            let t = sample_trajectory(&spec, &OutcomeSpace::coin(), seed).unwrap();
            let counts = empirical_counts(&t, 0..50).unwrap();
            let freq = counts[0] as f64 / 50.0;
            if (freq - 0.75).abs() > half_width {
                misses += 1;
            }
        }
        // With a 1% miss rate per seed, more than 5 misses in 100 seeds is wild.
        assert!(misses <= 5, "{misses} of 100 seeds outside the 99% interval");
    }

    #[test]
    fn per_segment_frequencies_match_theta() {
        // Mean empirical frequency over many seeds within 3 standard errors.
        let spec = default_changepoint();
        let trials = 10_000u64;
        let mut sum1 = 0.0;
        let mut sum2 = 0.0;
        for i in 0..trials {
            let t =
                sample_trajectory(&spec, &OutcomeSpace::coin(), child_seed(99, i)).unwrap();
            let c1 = empirical_counts(&t, 0..50).unwrap();
            let c2 = empirical_counts(&t, 50..100).unwrap();
            sum1 += c1[0] as f64 / 50.0;
            sum2 += c2[0] as f64 / 50.0;
        }
        let n = trials as f64;
        let se = (0.75f64 * 0.25 / 50.0 / n).sqrt();
        assert!((sum1 / n - 0.75).abs() < 3.0 * se);
        assert!((sum2 / n - 0.25).abs() < 3.0 * se);
    }

    #[test]
    fn counts_are_additive_and_bounded() {
        let spec = default_changepoint();
        let t = sample_trajectory(&spec, &OutcomeSpace::coin(), 5).unwrap();
        let full = empirical_counts(&t, 0..100).unwrap();
        let left = empirical_counts(&t, 0..50).unwrap();
        let right = empirical_counts(&t, 50..100).unwrap();
        assert_eq!(full[0], left[0] + right[0]);
        assert_eq!(full[1], left[1] + right[1]);
        assert_eq!(full[0] + full[1], 100);
        assert_eq!(empirical_counts(&t, 30..30).unwrap(), vec![0, 0]);
        assert!(empirical_counts(&t, 90..101).is_err());
    }

    #[test]
    fn switch_sweep_boundaries_line_up() {
        for k in (10..=90).step_by(10) {
            let spec = ChangepointSpec::new(vec![
                SegmentSpec::coin(k, 0.75).unwrap(),
                SegmentSpec::coin(100 - k, 0.25).unwrap(),
            ])
            .unwrap();
            assert_eq!(spec.switch_points(), vec![k, 100]);
            let t = sample_trajectory(&spec, &OutcomeSpace::coin(), 3).unwrap();
            assert_eq!(t.len(), 100);
        }
    }

    #[test]
    fn label_lines_round_trip() {
        let space = OutcomeSpace::coin();
        let spec = default_changepoint();
        let t = sample_trajectory(&spec, &space, 11).unwrap();
        let text = t.to_label_lines(&space);
        assert_eq!(parse_label_lines(&text, &space).unwrap(), t.outcomes());
        assert!(parse_label_lines("heads\nedge\n", &space).is_err());
    }

    #[test]
    fn child_seeds_spread() {
        let a = child_seed(42, 0);
        let b = child_seed(42, 1);
        let c = child_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        // Stable across calls.
        assert_eq!(a, child_seed(42, 0));
    }

    #[test]
    fn stationary_sampler_len_and_determinism() {
        let d = DiscreteDistribution::bernoulli(0.2).unwrap();
        assert!(sample_stationary(&d, 0, 1).is_empty());
        let a = sample_stationary(&d, 50, 9);
        let b = sample_stationary(&d, 50, 9);
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
    }
}
