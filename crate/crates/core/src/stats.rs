//! Confidence bounds shared by the Monte-Carlo checks.
//!
//! All bounds are one-sided at [`CONFIDENCE`]. Frequencies use the exact
//! Clopper-Pearson inversion of the binomial tail; means use the normal
//! approximation.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use thiserror::Error;

/// One-sided confidence level used by every check in the crate.
pub const CONFIDENCE: f64 = 0.99;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("aggregate needs at least one trial")]
    Empty,
}

/// `P(Bin(n, p) <= k)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    beta_reg((n - k) as f64, k as f64 + 1.0, 1.0 - p)
}

fn bisect(mut lo: f64, mut hi: f64, above: impl Fn(f64) -> bool) -> f64 {
    // `above(x)` is monotone: false on [lo, root), true on [root, hi].
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Upper one-sided Clopper-Pearson bound on a success probability.
pub fn cp_upper(successes: u64, n: u64, confidence: f64) -> f64 {
    if n == 0 || successes >= n {
        return 1.0;
    }
    let alpha = 1.0 - confidence;
    let start = successes as f64 / n as f64;
    bisect(start, 1.0, |u| binomial_cdf(successes, n, u) <= alpha)
}

/// Lower one-sided Clopper-Pearson bound on a success probability.
pub fn cp_lower(successes: u64, n: u64, confidence: f64) -> f64 {
    if n == 0 || successes == 0 {
        return 0.0;
    }
    let alpha = 1.0 - confidence;
    let end = successes as f64 / n as f64;
    // P(Bin(n, l) >= s) = alpha; that tail grows with l.
    let lower = bisect(0.0, end, |l| 1.0 - binomial_cdf(successes - 1, n, l) >= alpha);
    lower.min(end)
}

/// 1-based rank `j` such that the `j`-th order statistic of `n` samples is an
/// upper confidence bound for the `q`-quantile, or `None` when `n` samples
/// cannot certify it.
pub fn quantile_upper_rank(n: usize, q: f64, confidence: f64) -> Option<usize> {
    if n == 0 {
        return None;
    }
    if q <= 0.0 {
        return Some(1);
    }
    // Smallest j with P(Bin(n, q) <= j - 1) >= confidence.
    let (mut lo, mut hi) = (1usize, n + 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if binomial_cdf(mid as u64 - 1, n as u64, q) >= confidence {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    (lo <= n).then_some(lo)
}

/// Upper `confidence` quantile of the standard normal law.
pub fn normal_quantile(confidence: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(confidence)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    /// Trial values are 0/1 outcomes.
    Bernoulli,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundMethod {
    ClopperPearson,
    NormalApprox,
}

impl BoundMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundMethod::ClopperPearson => "clopper-pearson",
            BoundMethod::NormalApprox => "normal-approx",
        }
    }
}

/// Point estimate with one-sided bounds on both sides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: BoundMethod,
    /// Set when `n < 2`: the bounds carry no real information.
    pub insufficient_n: bool,
}

pub fn aggregate(trials: &[f64], estimator: Estimator) -> Result<Summary, StatsError> {
    if trials.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = trials.len();
    Ok(match estimator {
        Estimator::Bernoulli => {
            let hits = trials.iter().filter(|&&v| v != 0.0).count() as u64;
            Summary {
                n,
                estimate: hits as f64 / n as f64,
                lower: cp_lower(hits, n as u64, CONFIDENCE),
                upper: cp_upper(hits, n as u64, CONFIDENCE),
                method: BoundMethod::ClopperPearson,
                insufficient_n: n < 2,
            }
        }
        Estimator::Mean => {
            let mean = trials.iter().sum::<f64>() / n as f64;
            if n < 2 {
                return Ok(Summary {
                    n,
                    estimate: mean,
                    lower: f64::NEG_INFINITY,
                    upper: f64::INFINITY,
                    method: BoundMethod::NormalApprox,
                    insufficient_n: true,
                });
            }
            let var = trials.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let half = normal_quantile(CONFIDENCE) * (var / n as f64).sqrt();
            Summary {
                n,
                estimate: mean,
                lower: mean - half,
                upper: mean + half,
                method: BoundMethod::NormalApprox,
                insufficient_n: false,
            }
        }
    })
}

/// Frequency summary straight from counts.
pub fn frequency(successes: u64, n: u64) -> Summary {
    Summary {
        n: n as usize,
        estimate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
        lower: cp_lower(successes, n, CONFIDENCE),
        upper: cp_upper(successes, n, CONFIDENCE),
        method: BoundMethod::ClopperPearson,
        insufficient_n: n < 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct summation of the binomial pmf; independent of the incomplete beta.
    fn cdf_by_sum(k: u64, n: u64, p: f64) -> f64 {
        let mut total = 0.0;
        let mut log_binom = 0.0f64;
        for i in 0..=k.min(n) {
            if i > 0 {
                log_binom += ((n - i + 1) as f64).ln() - (i as f64).ln();
            }
            total += (log_binom + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp();
        }
        total
    }

    #[test]
    fn binomial_cdf_matches_pmf_sum() {
        for &(k, n, p) in &[(0, 10, 0.3), (3, 10, 0.3), (7, 20, 0.5), (1, 100, 0.01)] {
            assert!((binomial_cdf(k, n, p) - cdf_by_sum(k, n, p)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_successes_in_hundred() {
        // Closed form: 1 - 0.01^(1/100).
        let expected = 1.0 - 0.01f64.powf(1.0 / 100.0);
        let u = cp_upper(0, 100, CONFIDENCE);
        assert!((u - expected).abs() < 1e-9, "{u}");
        assert!((u - 0.045).abs() < 1e-3);
        let s = aggregate(&vec![0.0; 100], Estimator::Bernoulli).unwrap();
        assert_eq!(s.estimate, 0.0);
        assert!((s.upper - expected).abs() < 1e-9);
    }

    #[test]
    fn all_successes_lower_bound() {
        let expected = 0.01f64.powf(1.0 / 50.0);
        assert!((cp_lower(50, 50, CONFIDENCE) - expected).abs() < 1e-9);
    }

    #[test]
    fn bounds_bracket_estimate() {
        for &(s, n) in &[(1, 10), (5, 10), (9, 10), (183, 10_000)] {
            let p = s as f64 / n as f64;
            assert!(cp_lower(s, n, CONFIDENCE) <= p && p <= cp_upper(s, n, CONFIDENCE));
            // the defining tail identity
            let u = cp_upper(s, n, CONFIDENCE);
            assert!((binomial_cdf(s, n, u) - 0.01).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_trials_have_zero_width() {
        let s = aggregate(&[2.5; 40], Estimator::Mean).unwrap();
        assert_eq!(s.lower, 2.5);
        assert_eq!(s.upper, 2.5);
        assert!(!s.insufficient_n);
    }

    #[test]
    fn single_trial_is_flagged() {
        let s = aggregate(&[1.0], Estimator::Mean).unwrap();
        assert!(s.insufficient_n);
        assert!(aggregate(&[1.0], Estimator::Bernoulli).unwrap().insufficient_n);
        assert_eq!(aggregate(&[], Estimator::Mean), Err(StatsError::Empty));
    }

    #[test]
    fn quantile_rank() {
        // deterministic sample: the 0-quantile is the minimum
        assert_eq!(quantile_upper_rank(10, 0.0, CONFIDENCE), Some(1));
        // 50 samples cannot certify the 0.99 quantile at 0.99 confidence
        assert_eq!(quantile_upper_rank(50, 0.99, CONFIDENCE), None);
        let j = quantile_upper_rank(1000, 0.5, CONFIDENCE).unwrap();
        assert!(binomial_cdf(j as u64 - 1, 1000, 0.5) >= 0.99);
        assert!(binomial_cdf(j as u64 - 2, 1000, 0.5) < 0.99);
    }
}
