//! Scoring: total variation distance, posterior-CDF extremity of point
//! estimates, Pearson correlation with exact t-distribution p-values, grouped
//! TVD aggregation, and the attention/extremity correlation analysis.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::dist::DiscreteDistribution;
use crate::oracle::{BetaParams, OracleError};
use crate::special;

/// Errors from the scoring layer.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// Distributions over differently sized outcome spaces.
    SpaceMismatch { left: usize, right: usize },
    /// Paired sequences of different lengths.
    LengthMismatch { left: usize, right: usize },
    /// Correlation needs at least three points.
    TooFewPoints(usize),
    /// A zero-variance input sequence; reported, never returned as NaN.
    ZeroVariance { which: &'static str },
    /// Underlying posterior numerics failed.
    Oracle(OracleError),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::SpaceMismatch { left, right } => {
                write!(f, "distributions have {left} and {right} outcomes")
            }
            MetricsError::LengthMismatch { left, right } => {
                write!(f, "sequences have {left} and {right} entries")
            }
            MetricsError::TooFewPoints(n) => {
                write!(f, "need at least 3 points, got {n}")
            }
            MetricsError::ZeroVariance { which } => {
                write!(f, "{which} sequence has zero variance")
            }
            MetricsError::Oracle(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MetricsError {}

impl From<OracleError> for MetricsError {
    fn from(e: OracleError) -> Self {
        MetricsError::Oracle(e)
    }
}

/// Total variation distance ½ Σ|pᵢ − qᵢ| between distributions over the same
/// outcome space. Zero means identical; one means disjoint support.
pub fn tvd(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::SpaceMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let sum: f64 = p
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(&a, &b)| (a - b).abs())
        .sum();
    Ok(0.5 * sum)
}

/// Where a point estimate falls in the true posterior: the posterior CDF at
/// the estimate. Values near 0 or 1 flag extreme (miscalibrated) estimates.
pub fn cdf_extremity(point_estimate: f64, true_posterior: BetaParams) -> Result<f64, MetricsError> {
    Ok(true_posterior.cdf(point_estimate)?)
}

/// Student-t CDF with `df` degrees of freedom, computed through the
/// regularized incomplete beta function.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64, MetricsError> {
    if t == 0.0 {
        return Ok(0.5);
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 1.0 } else { 0.0 });
    }
    let x = df / (df + t * t);
    let half_tail = 0.5
        * special::reg_inc_beta(df / 2.0, 0.5, x)
            .map_err(|e| MetricsError::Oracle(OracleError::Numerics(e)))?;
    Ok(if t > 0.0 { 1.0 - half_tail } else { half_tail })
}

/// Sample Pearson correlation with a two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    /// Sample correlation coefficient in [−1, 1].
    pub r: f64,
    /// Two-sided p-value from the exact t-transform
    /// t = r·√((n−2)/(1−r²)), through the incomplete beta.
    pub p_value: f64,
    /// Number of paired points.
    pub n: usize,
}

/// Pearson correlation of two equal-length sequences (n ≥ 3, both with
/// non-zero variance).
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len();
    if n < 3 {
        return Err(MetricsError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(MetricsError::ZeroVariance { which: "x" });
    }
    if syy == 0.0 {
        return Err(MetricsError::ZeroVariance { which: "y" });
    }
    let r = (sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0);

    let df = nf - 2.0;
    let one_minus_r2 = 1.0 - r * r;
    let p_value = if one_minus_r2 <= 0.0 {
        0.0
    } else {
        // Two-sided tail: p = I_{df/(df+t²)}(df/2, 1/2) with t² = r²·df/(1−r²),
        // so the argument simplifies to 1−r².
        special::reg_inc_beta(df / 2.0, 0.5, df / (df + r * r * df / one_minus_r2))
            .map_err(|e| MetricsError::Oracle(OracleError::Numerics(e)))?
    };
    Ok(CorrelationResult { r, p_value, n })
}

/// Grouping key for TVD aggregation. Orders by predictor, then bias, then
/// in-context count, then prompt.
#[derive(Debug, Clone)]
pub struct TvdKey {
    pub predictor: String,
    pub theta: Option<f64>,
    pub icl_count: Option<u64>,
    pub prompt_id: Option<u64>,
}

impl PartialEq for TvdKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for TvdKey {}

impl PartialOrd for TvdKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TvdKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.predictor
            .cmp(&other.predictor)
            .then_with(|| cmp_opt_f64(&self.theta, &other.theta))
            .then_with(|| self.icl_count.cmp(&other.icl_count))
            .then_with(|| self.prompt_id.cmp(&other.prompt_id))
    }
}

fn cmp_opt_f64(a: &Option<f64>, b: &Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(y),
    }
}

/// One per-trial TVD observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TvdRecord {
    pub key: TvdKey,
    pub value: f64,
}

/// Mean and population standard deviation of a TVD group.
#[derive(Debug, Clone, PartialEq)]
pub struct TvdSummary {
    pub key: TvdKey,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Aggregate per-trial TVD values into per-key summaries (population
/// standard deviation), in stable key order.
pub fn aggregate_tvd(records: &[TvdRecord]) -> Vec<TvdSummary> {
    let mut groups: BTreeMap<TvdKey, Vec<f64>> = BTreeMap::new();
    for rec in records {
        groups.entry(rec.key.clone()).or_default().push(rec.value);
    }
    groups
        .into_iter()
        .map(|(key, values)| {
            let count = values.len();
            let mean = values.iter().sum::<f64>() / count as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
            TvdSummary {
                key,
                mean,
                std: libm::sqrt(var),
                count,
            }
        })
        .collect()
}

/// One row of an externally produced attention trace: per-segment attention
/// mass around switchover `switch_point`, plus the model's point estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionRecord {
    pub trial_id: u64,
    pub switch_point: usize,
    pub attn_seg1: f64,
    pub attn_seg2: f64,
    pub point_estimate: f64,
}

/// An attention record joined with the Bayesian ground truth for its trial:
/// the posterior-CDF extremity of the point estimate and the true posterior
/// mean, plus the trajectory length the record belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredAttention {
    pub record: AttentionRecord,
    pub extremity: f64,
    pub posterior_mean: f64,
    pub total_len: usize,
}

/// A per-record row of the fraction-versus-deviation table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionRow {
    pub trial_id: u64,
    pub switch_point: usize,
    /// Number of post-switchover samples, M = N − K.
    pub m: usize,
    pub fraction_seg1: f64,
    pub fraction_seg2: f64,
    pub extremity: f64,
    /// |point estimate − true posterior mean|.
    pub deviation: f64,
}

/// Least-squares degree-2 fit of fraction-on-segment-2 against the true
/// posterior mean, per M group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub m: usize,
    /// c₀ + c₁·x + c₂·x².
    pub coefficients: [f64; 3],
    pub count: usize,
}

/// A group or record excluded from the analysis, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipNote {
    pub what: String,
    pub reason: String,
}

/// Output of [`attention_analysis`].
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionAnalysis {
    /// Correlation of segment-1 attention mass with extremity, when defined.
    pub seg1: Option<CorrelationResult>,
    /// Correlation of segment-2 attention mass with extremity, when defined.
    pub seg2: Option<CorrelationResult>,
    pub fractions: Vec<FractionRow>,
    pub group_fits: Vec<QuadraticFit>,
    pub skipped: Vec<SkipNote>,
}

/// Correlate per-segment attention mass with point-estimate extremity and
/// build the fraction-versus-deviation table with per-M quadratic fits.
///
/// Degenerate inputs (zero total attention, empty post-switchover segments,
/// groups without variance) are skipped with a report entry rather than
/// failing the whole analysis.
pub fn attention_analysis(records: &[ScoredAttention]) -> Result<AttentionAnalysis, MetricsError> {
    if records.len() < 3 {
        return Err(MetricsError::TooFewPoints(records.len()));
    }
    let mut skipped = Vec::new();

    let extremity: Vec<f64> = records.iter().map(|r| r.extremity).collect();
    let seg1_mass: Vec<f64> = records.iter().map(|r| r.record.attn_seg1).collect();
    let seg2_mass: Vec<f64> = records.iter().map(|r| r.record.attn_seg2).collect();

    let mut correlate = |name: &str, xs: &[f64]| match pearson(xs, &extremity) {
        Ok(c) => Some(c),
        Err(e) => {
            skipped.push(SkipNote {
                what: name.to_string(),
                reason: e.to_string(),
            });
            None
        }
    };
    let seg1 = correlate("seg1 correlation", &seg1_mass);
    let seg2 = correlate("seg2 correlation", &seg2_mass);

    let mut fractions = Vec::with_capacity(records.len());
    let mut by_m: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        let total = r.record.attn_seg1 + r.record.attn_seg2;
        if total <= 0.0 {
            skipped.push(SkipNote {
                what: alloc::format!("trial {}", r.record.trial_id),
                reason: "zero total attention mass".to_string(),
            });
            continue;
        }
        let m = r.total_len.saturating_sub(r.record.switch_point);
        let row = FractionRow {
            trial_id: r.record.trial_id,
            switch_point: r.record.switch_point,
            m,
            fraction_seg1: r.record.attn_seg1 / total,
            fraction_seg2: r.record.attn_seg2 / total,
            extremity: r.extremity,
            deviation: (r.record.point_estimate - r.posterior_mean).abs(),
        };
        fractions.push(row);
        if m == 0 {
            // Switchover at the end: no post-switchover segment to fit.
            continue;
        }
        by_m.entry(m).or_default().push((r.posterior_mean, row.fraction_seg2));
    }

    let mut group_fits = Vec::new();
    for (m, pts) in by_m {
        match quadratic_fit(&pts) {
            Ok(coefficients) => group_fits.push(QuadraticFit {
                m,
                coefficients,
                count: pts.len(),
            }),
            Err(reason) => skipped.push(SkipNote {
                what: alloc::format!("M={m} quadratic fit"),
                reason,
            }),
        }
    }
    // Record explicitly when K = N rows were present but unusable for fits.
    if records.iter().any(|r| r.total_len == r.record.switch_point) {
        skipped.push(SkipNote {
            what: "M=0 group".to_string(),
            reason: "switchover at trajectory end leaves no second segment".to_string(),
        });
    }

    Ok(AttentionAnalysis {
        seg1,
        seg2,
        fractions,
        group_fits,
        skipped,
    })
}

/// Degree-2 least squares through the normal equations, with an explicit
/// conditioning check on the pivots.
#[allow(clippy::needless_range_loop)]
fn quadratic_fit(points: &[(f64, f64)]) -> Result<[f64; 3], String> {
    if points.len() < 3 {
        return Err(alloc::format!("needs at least 3 points, got {}", points.len()));
    }
    // Accumulate X'X (moments up to x^4) and X'y.
    let mut s = [0.0f64; 5];
    let mut b = [0.0f64; 3];
    for &(x, y) in points {
        let x2 = x * x;
        s[0] += 1.0;
        s[1] += x;
        s[2] += x2;
        s[3] += x2 * x;
        s[4] += x2 * x2;
        b[0] += y;
        b[1] += x * y;
        b[2] += x2 * y;
    }
    let mut a = [
        [s[0], s[1], s[2], b[0]],
        [s[1], s[2], s[3], b[1]],
        [s[2], s[3], s[4], b[2]],
    ];
    let scale = a
        .iter()
        .flat_map(|row| row[..3].iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    // Gaussian elimination with partial pivoting.
    for col in 0..3 {
        let mut pivot = col;
        for row in col + 1..3 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        a.swap(col, pivot);
        if a[col][col].abs() < 1e-12 * scale {
            return Err("degenerate x variance in group".to_string());
        }
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut c = [0.0f64; 3];
    for col in (0..3).rev() {
        let mut acc = a[col][3];
        for k in col + 1..3 {
            acc -= a[col][k] * c[k];
        }
        c[col] = acc / a[col][col];
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(v: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn tvd_examples() {
        let p = dist(&[0.7, 0.3]);
        assert_eq!(tvd(&p, &p).unwrap(), 0.0);
        assert_eq!(tvd(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(), 1.0);
        let v = tvd(&dist(&[0.7, 0.3]), &dist(&[0.5, 0.5])).unwrap();
        assert!((v - 0.2).abs() < 1e-15);
        assert!(tvd(&p, &dist(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn binary_tvd_is_p_heads_gap() {
        for (p, q) in [(0.1, 0.9), (0.33, 0.41), (0.0, 1.0), (0.5, 0.5)] {
            let d = tvd(
                &DiscreteDistribution::bernoulli(p).unwrap(),
                &DiscreteDistribution::bernoulli(q).unwrap(),
            )
            .unwrap();
            assert!((d - (p - q).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn extremity_examples() {
        let v = cdf_extremity(0.3, BetaParams::uniform()).unwrap();
        assert!((v - 0.3).abs() < 1e-14);
        let v = cdf_extremity(0.5, BetaParams::new(8.0, 4.0).unwrap()).unwrap();
        assert!((v - 0.11328125).abs() < 1e-10);
    }

    #[test]
    fn extremity_of_median_is_half() {
        // Find the Beta(8,4) median by bisection, then check the definition.
        let post = BetaParams::new(8.0, 4.0).unwrap();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if post.cdf(mid).unwrap() < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let median = 0.5 * (lo + hi);
        let v = cdf_extremity(median, post).unwrap();
        assert!((v - 0.5).abs() < 1e-10);
    }

    #[test]
    fn pearson_perfect_line() {
        let c = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
        assert!(c.p_value < 1e-12);
    }

    #[test]
    fn pearson_orthogonal_gives_p_one() {
        // Centered x is [-1, 0, 1] and centered y is [-1/3, 2/3, -1/3], so
        // Σ dx·dy = 0 exactly: r = 0, t = 0, p = 1.
        let c = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 1.0]).unwrap();
        assert!(c.r.abs() < 1e-12);
        assert!((c.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pearson_matches_direct_covariance_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x + rng.random::<f64>()).collect();
        let c = pearson(&xs, &ys).unwrap();

        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        let vx = xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / n;
        let vy = ys.iter().map(|y| (y - my) * (y - my)).sum::<f64>() / n;
        assert!((c.r - cov / libm::sqrt(vx * vy)).abs() < 1e-12);
    }

    #[test]
    fn pearson_independent_draws_are_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let c = pearson(&xs, &ys).unwrap();
        assert!(c.r.abs() < 0.05, "r = {}", c.r);
    }

    #[test]
    fn pearson_guards() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[2.0, 4.0]),
            Err(MetricsError::TooFewPoints(2))
        ));
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(MetricsError::ZeroVariance { which: "x" })
        ));
    }

    #[test]
    fn student_t_cdf_identities() {
        assert_eq!(student_t_cdf(0.0, 5.0).unwrap(), 0.5);
        let v = student_t_cdf(1.5, 8.0).unwrap();
        let w = student_t_cdf(-1.5, 8.0).unwrap();
        assert!((v + w - 1.0).abs() < 1e-12);
        assert!(v > 0.9 && v < 1.0);
    }

    #[test]
    fn aggregate_single_and_pair() {
        let key = TvdKey {
            predictor: "p".to_string(),
            theta: Some(0.3),
            icl_count: None,
            prompt_id: None,
        };
        let one = aggregate_tvd(&[TvdRecord {
            key: key.clone(),
            value: 0.4,
        }]);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].mean, 0.4);
        assert_eq!(one[0].std, 0.0);
        assert_eq!(one[0].count, 1);

        let two = aggregate_tvd(&[
            TvdRecord {
                key: key.clone(),
                value: 0.1,
            },
            TvdRecord { key, value: 0.3 },
        ]);
        assert_eq!(two.len(), 1);
        assert!((two[0].mean - 0.2).abs() < 1e-15);
        assert!((two[0].std - 0.1).abs() < 1e-15);
    }

    #[test]
    fn aggregate_grid_grouping() {
        // 11 biases × 50 prompts collapse to 11 groups of 50 when grouping
        // drops the prompt key.
        let mut records = Vec::new();
        for theta_pct in (0..=100).step_by(10) {
            for prompt in 0..50u64 {
                records.push(TvdRecord {
                    key: TvdKey {
                        predictor: "fixed".to_string(),
                        theta: Some(theta_pct as f64 / 100.0),
                        icl_count: None,
                        prompt_id: None,
                    },
                    value: prompt as f64 / 100.0,
                });
            }
        }
        let summaries = aggregate_tvd(&records);
        assert_eq!(summaries.len(), 11);
        assert!(summaries.iter().all(|s| s.count == 50));
        // Stable ascending theta order.
        for w in summaries.windows(2) {
            assert!(w[0].key.theta.unwrap() < w[1].key.theta.unwrap());
        }
    }

    #[test]
    fn constant_group_mean_is_exact() {
        let key = TvdKey {
            predictor: "c".to_string(),
            theta: None,
            icl_count: Some(3),
            prompt_id: Some(1),
        };
        let records: Vec<TvdRecord> = (0..7)
            .map(|_| TvdRecord {
                key: key.clone(),
                value: 0.125,
            })
            .collect();
        let s = aggregate_tvd(&records);
        assert_eq!(s[0].mean, 0.125);
        assert_eq!(s[0].std, 0.0);
    }

    fn scored(trial: u64, k: usize, n: usize, a1: f64, a2: f64, ex: f64) -> ScoredAttention {
        ScoredAttention {
            record: AttentionRecord {
                trial_id: trial,
                switch_point: k,
                attn_seg1: a1,
                attn_seg2: a2,
                point_estimate: 0.5,
            },
            extremity: ex,
            posterior_mean: 0.5,
            total_len: n,
        }
    }

    #[test]
    fn attention_extremity_identity_gives_unit_correlation() {
        let records: Vec<ScoredAttention> = (0..20)
            .map(|i| {
                let mass = 0.1 + i as f64 / 20.0;
                scored(i as u64, 50, 100, mass, mass / 2.0, mass)
            })
            .collect();
        let out = attention_analysis(&records).unwrap();
        let seg1 = out.seg1.unwrap();
        assert!((seg1.r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attention_independent_draws_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let records: Vec<ScoredAttention> = (0..1000)
            .map(|i| {
                let mut r = scored(
                    i as u64,
                    50,
                    100,
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                );
                r.posterior_mean = rng.random::<f64>();
                r
            })
            .collect();
        let out = attention_analysis(&records).unwrap();
        assert!(out.seg1.unwrap().r.abs() < 0.1);
        assert!(out.seg2.unwrap().r.abs() < 0.1);
        assert_eq!(out.fractions.len(), 1000);
        assert_eq!(out.group_fits.len(), 1); // single M group
    }

    #[test]
    fn attention_k_equals_n_group_skipped() {
        let mut records: Vec<ScoredAttention> = (0..5)
            .map(|i| scored(i as u64, 50, 100, 0.4 + 0.01 * i as f64, 0.2, 0.1 * i as f64))
            .collect();
        records.push(scored(99, 100, 100, 0.9, 0.0, 0.5));
        let out = attention_analysis(&records).unwrap();
        assert!(out.group_fits.iter().all(|g| g.m != 0));
        assert!(out
            .skipped
            .iter()
            .any(|s| s.what == "M=0 group"));
    }

    #[test]
    fn attention_needs_three_records() {
        let records = vec![scored(0, 50, 100, 0.1, 0.2, 0.3); 2];
        assert!(matches!(
            attention_analysis(&records),
            Err(MetricsError::TooFewPoints(2))
        ));
    }

    #[test]
    fn quadratic_fit_recovers_exact_polynomial() {
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let x = i as f64 / 10.0;
                (x, 0.3 - 0.8 * x + 1.9 * x * x)
            })
            .collect();
        let c = quadratic_fit(&pts).unwrap();
        assert!((c[0] - 0.3).abs() < 1e-9);
        assert!((c[1] + 0.8).abs() < 1e-9);
        assert!((c[2] - 1.9).abs() < 1e-9);
        // Degenerate x values are refused.
        let flat = vec![(0.5, 0.1), (0.5, 0.2), (0.5, 0.3)];
        assert!(quadratic_fit(&flat).is_err());
    }
}
