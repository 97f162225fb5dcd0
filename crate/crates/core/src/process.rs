//! Seeded generators for the instance process and prefix statistics.
//!
//! Every generator emits exactly representable points, so distinctness is
//! plain equality of represented values.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::metric_space::{MetricSpace, Point};
use crate::seeding::{self, Stream};

#[derive(Debug, Error, PartialEq)]
pub enum ProcessError {
    #[error("invalid sampler: {0}")]
    InvalidSampler(String),
    #[error("prefix must be nonempty")]
    EmptyPrefix,
}

/// Declared truth of the finite-support condition for a generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SupportClass {
    CertainlyFinite {
        support_size: usize,
    },
    CertainlyInfinite,
    /// Infinite with probability `p_infinite`, decided by one coin per rollout.
    Mixed {
        p_infinite: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum SamplerKind {
    /// I.i.d. draws from a finite support with the given (unnormalized) weights.
    FiniteSupportIid { support: Vec<Point>, weights: Vec<f64> },
    /// I.i.d. uniform on `[0, 1)`.
    IidUniform,
    /// `X_t = 2^(-step * t)`.
    GeometricDecay { step: f64 },
    /// Echoes the list, cycling once it is exhausted.
    DeterministicList { values: Vec<Point> },
    /// Blocks `[2^b, 2^(b+1))` alternate between the anchor (even `b`) and
    /// fresh dyadic points of the unit interval (odd `b`).
    AlternatingAdversarial { anchor: f64 },
    /// One coin with bias `p_infinite` picks `infinite` or `finite` for the
    /// whole rollout.
    Mixed { p_infinite: f64, finite: Box<SamplerKind>, infinite: Box<SamplerKind> },
}

impl SamplerKind {
    pub fn finite_support(support: Vec<f64>) -> Self {
        let weights = vec![1.0; support.len()];
        SamplerKind::FiniteSupportIid { support: support.into_iter().map(Point::Scalar).collect(), weights }
    }

    pub fn constant(value: f64) -> Self {
        SamplerKind::DeterministicList { values: vec![Point::Scalar(value)] }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::FiniteSupportIid { .. } => "finite-support-iid",
            SamplerKind::IidUniform => "iid-uniform",
            SamplerKind::GeometricDecay { .. } => "geometric-decay",
            SamplerKind::DeterministicList { .. } => "deterministic-list",
            SamplerKind::AlternatingAdversarial { .. } => "alternating-adversarial",
            SamplerKind::Mixed { .. } => "mixed",
        }
    }

    fn support_class(&self) -> SupportClass {
        match self {
            SamplerKind::FiniteSupportIid { support, .. } => {
                SupportClass::CertainlyFinite { support_size: support.iter().collect::<HashSet<_>>().len() }
            }
            SamplerKind::DeterministicList { values } => {
                SupportClass::CertainlyFinite { support_size: values.iter().collect::<HashSet<_>>().len() }
            }
            SamplerKind::IidUniform
            | SamplerKind::GeometricDecay { .. }
            | SamplerKind::AlternatingAdversarial { .. } => SupportClass::CertainlyInfinite,
            SamplerKind::Mixed { p_infinite, .. } => SupportClass::Mixed { p_infinite: *p_infinite },
        }
    }

    fn validate(&self) -> Result<(), ProcessError> {
        let bad = |m: &str| Err(ProcessError::InvalidSampler(m.to_string()));
        match self {
            SamplerKind::FiniteSupportIid { support, weights } => {
                if support.is_empty() || support.len() != weights.len() {
                    return bad("finite support needs matching nonempty support and weights");
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || weights.iter().sum::<f64>() <= 0.0 {
                    return bad("weights must be finite, nonnegative and not all zero");
                }
                Ok(())
            }
            SamplerKind::DeterministicList { values } if values.is_empty() => bad("deterministic list is empty"),
            SamplerKind::GeometricDecay { step } if !(*step > 0.0) || !step.is_finite() => {
                bad("geometric decay step must be positive")
            }
            SamplerKind::AlternatingAdversarial { anchor } if !(0.0..=1.0).contains(anchor) => {
                bad("anchor must lie in [0, 1]")
            }
            SamplerKind::Mixed { p_infinite, finite, infinite } => {
                if !(0.0..=1.0).contains(p_infinite) {
                    return bad("p_infinite must lie in [0, 1]");
                }
                finite.validate()?;
                infinite.validate()?;
                match (finite.support_class(), infinite.support_class()) {
                    (SupportClass::CertainlyFinite { .. }, SupportClass::CertainlyInfinite) => Ok(()),
                    _ => bad("mixed sampler needs a finite part and an infinite part"),
                }
            }
            _ => Ok(()),
        }
    }
}

impl SamplerKind {
    /// Largest horizon over which a geometric-decay sampler stays in the
    /// normal floating-point range (and therefore emits distinct values).
    pub fn representable_horizon(&self) -> Option<usize> {
        match self {
            SamplerKind::GeometricDecay { step } => Some((1022.0 / step).floor() as usize),
            _ => None,
        }
    }
}

/// A seeded, reproducible process descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessSampler {
    kind: SamplerKind,
    seed: u64,
}

/// A finite prefix of one realization.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub points: Vec<Point>,
    /// Whether this realization takes infinitely many values.
    pub infinite_event: bool,
}

impl ProcessSampler {
    pub fn new(kind: SamplerKind, seed: u64) -> Result<Self, ProcessError> {
        kind.validate()?;
        Ok(ProcessSampler { kind, seed })
    }

    pub fn kind(&self) -> &SamplerKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn support_class(&self) -> SupportClass {
        self.kind.support_class()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ProcessSampler { kind: self.kind.clone(), seed }
    }

    /// Independent copy for Monte-Carlo replica `replica`.
    pub fn replica(&self, replica: u64) -> Self {
        self.with_seed(seeding::derive(self.seed, &[replica]))
    }

    pub fn stream(&self) -> PointStream {
        PointStream::new(&self.kind, seeding::stream(self.seed, &[]))
    }

    /// `X_1, ..., X_horizon`.
    pub fn rollout(&self, horizon: usize) -> Rollout {
        let mut stream = self.stream();
        let points = (&mut stream).take(horizon).collect();
        Rollout { points, infinite_event: stream.infinite_event() }
    }

    pub fn replica_rollout(&self, replica: u64, horizon: usize) -> Rollout {
        self.replica(replica).rollout(horizon)
    }
}

/// Lazily generated realization; a longer read always extends a shorter one.
pub struct PointStream {
    kind: SamplerKind,
    rng: Stream,
    weights: Option<WeightedIndex<f64>>,
    t: usize,
    fresh: usize,
    infinite_event: bool,
}

impl PointStream {
    fn new(kind: &SamplerKind, mut rng: Stream) -> Self {
        let (kind, infinite_event) = match kind {
            SamplerKind::Mixed { p_infinite, finite, infinite } => {
                if rng.random_bool(*p_infinite) {
                    ((**infinite).clone(), true)
                } else {
                    ((**finite).clone(), false)
                }
            }
            other => (other.clone(), matches!(other.support_class(), SupportClass::CertainlyInfinite)),
        };
        let weights = match &kind {
            SamplerKind::FiniteSupportIid { weights, .. } => {
                Some(WeightedIndex::new(weights.iter().copied()).expect("validated weights"))
            }
            _ => None,
        };
        PointStream { kind, rng, weights, t: 0, fresh: 0, infinite_event }
    }

    pub fn infinite_event(&self) -> bool {
        self.infinite_event
    }

    /// Rounds emitted so far.
    pub fn position(&self) -> usize {
        self.t
    }
}

fn pow2_neg(exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent <= 1022.0 {
        f64::from_bits(((1023.0 - exponent) as u64) << 52)
    } else {
        (-exponent).exp2()
    }
}

impl Iterator for PointStream {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        self.t += 1;
        let t = self.t;
        Some(match &self.kind {
            SamplerKind::FiniteSupportIid { support, .. } => {
                let i = self.weights.as_ref().expect("weights").sample(&mut self.rng);
                support[i].clone()
            }
            SamplerKind::IidUniform => Point::Scalar(self.rng.random::<f64>()),
            SamplerKind::GeometricDecay { step } => Point::Scalar(pow2_neg(step * t as f64)),
            SamplerKind::DeterministicList { values } => values[(t - 1) % values.len()].clone(),
            SamplerKind::AlternatingAdversarial { anchor } => {
                let block = usize::BITS - 1 - t.leading_zeros();
                if block.is_multiple_of(2) {
                    Point::Scalar(*anchor)
                } else {
                    let space = MetricSpace::unit_interval();
                    loop {
                        self.fresh += 1;
                        let p = space.dense_point(self.fresh);
                        if p != Point::Scalar(*anchor) {
                            break p;
                        }
                    }
                }
            }
            SamplerKind::Mixed { .. } => unreachable!("resolved at stream start"),
        })
    }
}

/// Distinct-value count and minimum pairwise gap of a prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixStats {
    pub horizon: usize,
    pub distinct_count: usize,
    /// `None` when fewer than two distinct values were seen.
    pub min_gap: Option<f64>,
}

pub fn prefix_stats(prefix: &[Point], space: &MetricSpace) -> Result<PrefixStats, ProcessError> {
    if prefix.is_empty() {
        return Err(ProcessError::EmptyPrefix);
    }
    let mut distinct: Vec<Point> = prefix.iter().cloned().collect::<HashSet<_>>().into_iter().collect();
    distinct.sort();
    let min_gap = if distinct.len() < 2 {
        None
    } else if distinct.iter().all(|p| matches!(p, Point::Scalar(_))) {
        distinct.windows(2).map(|w| space.distance(&w[0], &w[1])).reduce(f64::min)
    } else {
        let mut best = f64::INFINITY;
        for (i, a) in distinct.iter().enumerate() {
            for b in &distinct[i + 1..] {
                best = best.min(space.distance(a, b));
            }
        }
        Some(best)
    };
    Ok(PrefixStats { horizon: prefix.len(), distinct_count: distinct.len(), min_gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(r: &Rollout) -> Vec<f64> {
        r.points.iter().map(|p| p.scalar().unwrap()).collect()
    }

    #[test]
    fn deterministic_list_echoes() {
        let s =
            ProcessSampler::new(SamplerKind::DeterministicList { values: vec![0.1.into(), 0.2.into(), 0.1.into()] }, 0)
                .unwrap();
        assert_eq!(scalars(&s.rollout(3)), vec![0.1, 0.2, 0.1]);
        assert_eq!(scalars(&s.rollout(5)), vec![0.1, 0.2, 0.1, 0.1, 0.2]);
    }

    #[test]
    fn finite_support_stays_in_support() {
        let s = ProcessSampler::new(SamplerKind::finite_support(vec![0.25, 0.75]), 11).unwrap();
        let r = s.rollout(4);
        assert_eq!(r.points.len(), 4);
        assert!(scalars(&r).iter().all(|x| *x == 0.25 || *x == 0.75));
        assert!(!r.infinite_event);
    }

    #[test]
    fn geometric_decay_closed_form() {
        let s = ProcessSampler::new(SamplerKind::GeometricDecay { step: 1.0 }, 0).unwrap();
        assert_eq!(scalars(&s.rollout(3)), vec![0.5, 0.25, 0.125]);
        assert_eq!(s.support_class(), SupportClass::CertainlyInfinite);
        let r = s.rollout(1000);
        assert_eq!(r.points[999], Point::Scalar(2f64.powi(-1000)));
        let stats = prefix_stats(&r.points, &MetricSpace::unit_interval()).unwrap();
        assert_eq!(stats.distinct_count, 1000);
    }

    #[test]
    fn rollouts_are_reproducible_and_prefix_consistent() {
        let s = ProcessSampler::new(SamplerKind::IidUniform, 5).unwrap();
        let short = s.rollout(10);
        let long = s.rollout(50);
        assert_eq!(short.points[..], long.points[..10]);
        assert_eq!(s.rollout(10), short);
        assert_ne!(s.replica_rollout(1, 10), short);
    }

    #[test]
    fn prefix_stats_examples() {
        let sp = MetricSpace::unit_interval();
        let p = |v: &[f64]| v.iter().map(|&x| Point::Scalar(x)).collect::<Vec<_>>();
        let st = prefix_stats(&p(&[0.1, 0.2, 0.1]), &sp).unwrap();
        assert_eq!(st.distinct_count, 2);
        assert!((st.min_gap.unwrap() - 0.1).abs() < 1e-15);
        let st = prefix_stats(&p(&[0.5]), &sp).unwrap();
        assert_eq!((st.distinct_count, st.min_gap), (1, None));
        let st = prefix_stats(&p(&[0.5, 0.25, 0.125, 0.0625]), &sp).unwrap();
        assert_eq!((st.distinct_count, st.min_gap), (4, Some(0.0625)));
        assert_eq!(prefix_stats(&[], &sp), Err(ProcessError::EmptyPrefix));
    }

    #[test]
    fn min_gap_matches_all_pairs() {
        let sp = MetricSpace::unit_interval();
        let r = ProcessSampler::new(SamplerKind::IidUniform, 9).unwrap().rollout(60);
        let xs = scalars(&r);
        let mut brute = f64::INFINITY;
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                if xs[i] != xs[j] {
                    brute = brute.min((xs[i] - xs[j]).abs());
                }
            }
        }
        assert_eq!(prefix_stats(&r.points, &sp).unwrap().min_gap, Some(brute));
    }

    #[test]
    fn mixed_sampler_reports_event() {
        let kind = SamplerKind::Mixed {
            p_infinite: 0.5,
            finite: Box::new(SamplerKind::finite_support(vec![0.1, 0.9])),
            infinite: Box::new(SamplerKind::IidUniform),
        };
        let s = ProcessSampler::new(kind, 3).unwrap();
        let sp = MetricSpace::unit_interval();
        let mut infinite = 0;
        for r in 0..400 {
            let roll = s.replica_rollout(r, 30);
            let d = prefix_stats(&roll.points, &sp).unwrap().distinct_count;
            if roll.infinite_event {
                infinite += 1;
                assert_eq!(d, 30);
            } else {
                assert!(d <= 2);
            }
        }
        assert!((150..250).contains(&infinite), "{infinite}");
    }

    #[test]
    fn alternating_blocks() {
        let s = ProcessSampler::new(SamplerKind::AlternatingAdversarial { anchor: 0.0 }, 0).unwrap();
        let xs = scalars(&s.rollout(8));
        assert_eq!(xs, vec![0.0, 0.5, 0.25, 0.0, 0.0, 0.0, 0.0, 0.75]);
    }

    #[test]
    fn invalid_samplers_rejected() {
        assert!(ProcessSampler::new(SamplerKind::DeterministicList { values: vec![] }, 0).is_err());
        assert!(ProcessSampler::new(SamplerKind::GeometricDecay { step: 0.0 }, 0).is_err());
        let bad_mixed = SamplerKind::Mixed {
            p_infinite: 0.5,
            finite: Box::new(SamplerKind::IidUniform),
            infinite: Box::new(SamplerKind::IidUniform),
        };
        assert!(ProcessSampler::new(bad_mixed, 0).is_err());
    }
}
