//! Separable metric instance spaces, their dyadic dense enumerations, and the
//! greedy disjoint covers built from closed balls around dense points.
//!
//! Cell `k` of a greedy cover is the closed ball of radius `delta / 2` around
//! the `k`-th dense point, minus every earlier cell. A point therefore belongs
//! to the cell of the *first* ball that contains it, which is how membership is
//! decided here.

use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use thiserror::Error;

use crate::process::ProcessSampler;
use crate::stats::{cp_upper, CONFIDENCE};

/// Largest number of cells `cover_for_process` will certify.
pub const COVER_CAP: usize = 1 << 20;

/// A point of an instance space, also used for values of the label space.
///
/// Equality and hashing are exact on the bit pattern (with `-0.0` folded into
/// `0.0`), so two points are the same iff they are represented identically.
#[derive(Clone, Debug)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
    Atom(usize),
}

fn canonical(x: f64) -> u64 {
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

impl Point {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Point::Scalar(x) => Some(*x),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Point::Scalar(_) => 0,
            Point::Vector(_) => 1,
            Point::Atom(_) => 2,
        }
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::Scalar(x)
    }
}

impl PartialEq for Point {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Point::Scalar(a), Point::Scalar(b)) => canonical(*a) == canonical(*b),
            (Point::Vector(a), Point::Vector(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| canonical(*x) == canonical(*y))
            }
            (Point::Atom(a), Point::Atom(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Point {}

impl Hash for Point {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Point::Scalar(x) => canonical(*x).hash(state),
            Point::Vector(v) => {
                v.len().hash(state);
                v.iter().for_each(|x| canonical(*x).hash(state));
            }
            Point::Atom(a) => a.hash(state),
        }
    }
}

impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        let fold = |x: f64| if x == 0.0 { 0.0 } else { x };
        match (self, other) {
            (Point::Scalar(a), Point::Scalar(b)) => fold(*a).total_cmp(&fold(*b)),
            (Point::Vector(a), Point::Vector(b)) => a
                .iter()
                .zip(b)
                .map(|(x, y)| fold(*x).total_cmp(&fold(*y)))
                .find(|o| o.is_ne())
                .unwrap_or_else(|| a.len().cmp(&b.len())),
            (Point::Atom(a), Point::Atom(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    UnitInterval,
    RealLine,
    /// `[0, 1]^dim` with the Euclidean distance.
    UnitBox {
        dim: usize,
    },
    /// `size` atoms at mutual distance 1.
    Discrete {
        size: usize,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("horizon-insufficient: no cover of at most {cap} cells certifies the escape bound")]
    HorizonInsufficient { cap: usize },
    #[error("insufficient trials: {trials} rollouts cannot certify escape rate below {epsilon}")]
    InsufficientTrials { trials: usize, epsilon: f64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricSpace {
    kind: SpaceKind,
}

impl MetricSpace {
    pub fn new(kind: SpaceKind) -> Result<Self, SpaceError> {
        match kind {
            SpaceKind::UnitBox { dim: 0 } => Err(SpaceError::InvalidArgument("box dimension must be positive".into())),
            SpaceKind::Discrete { size: 0 } => {
                Err(SpaceError::InvalidArgument("discrete space must be nonempty".into()))
            }
            kind => Ok(MetricSpace { kind }),
        }
    }

    pub fn unit_interval() -> Self {
        MetricSpace { kind: SpaceKind::UnitInterval }
    }

    pub fn real_line() -> Self {
        MetricSpace { kind: SpaceKind::RealLine }
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        match (a, b) {
            (Point::Scalar(x), Point::Scalar(y)) => (x - y).abs(),
            (Point::Vector(x), Point::Vector(y)) if x.len() == y.len() => {
                x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
            }
            (Point::Atom(x), Point::Atom(y)) => {
                if x == y {
                    0.0
                } else {
                    1.0
                }
            }
            _ => f64::INFINITY,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match (&self.kind, p) {
            (SpaceKind::UnitInterval, Point::Scalar(x)) => (0.0..=1.0).contains(x),
            (SpaceKind::RealLine, Point::Scalar(x)) => x.is_finite(),
            (SpaceKind::UnitBox { dim }, Point::Vector(v)) => {
                v.len() == *dim && v.iter().all(|x| (0.0..=1.0).contains(x))
            }
            (SpaceKind::Discrete { size }, Point::Atom(a)) => a < size,
            _ => false,
        }
    }

    /// The dense enumeration `x_1, x_2, ...` (infinite; finite sets cycle).
    pub fn dense_points(&self) -> DenseEnumeration {
        DenseEnumeration::new(self.kind.clone())
    }

    /// `x_index` of the dense enumeration, 1-based.
    pub fn dense_point(&self, index: usize) -> Point {
        assert!(index >= 1, "dense enumeration is 1-based");
        match &self.kind {
            SpaceKind::UnitInterval => Point::Scalar(unit_dyadic(index)),
            SpaceKind::Discrete { size } => Point::Atom((index - 1) % size),
            _ => self.dense_points().nth(index - 1).expect("enumeration is infinite"),
        }
    }

    /// Index of the first dense point whose closed `radius`-ball contains `x`,
    /// searching no further than `limit`.
    pub fn first_ball_index(&self, x: &Point, radius: f64, limit: usize) -> Option<usize> {
        match (&self.kind, x) {
            (SpaceKind::UnitInterval, Point::Scalar(v)) => first_unit_ball(*v, radius, limit),
            (SpaceKind::Discrete { size }, Point::Atom(a)) if a < size => {
                let idx = if radius >= 1.0 { 1 } else { a + 1 };
                (idx <= limit).then_some(idx)
            }
            _ => self.first_ball_index_by_scan(x, radius, limit),
        }
    }

    /// Reference implementation of [`first_ball_index`](Self::first_ball_index):
    /// walk the enumeration in order.
    pub fn first_ball_index_by_scan(&self, x: &Point, radius: f64, limit: usize) -> Option<usize> {
        self.dense_points().take(limit).position(|c| self.distance(x, &c) <= radius).map(|i| i + 1)
    }
}

/// `index`-th point of the breadth-first dyadic enumeration of `[0, 1]`:
/// 1/2, 1/4, 3/4, 1/8, 3/8, ...
fn unit_dyadic(index: usize) -> f64 {
    let level = usize::BITS - index.leading_zeros(); // index in [2^(level-1), 2^level)
    let offset = index - (1usize << (level - 1));
    (2 * offset + 1) as f64 / (1u64 << level) as f64
}

fn first_unit_ball(x: f64, radius: f64, limit: usize) -> Option<usize> {
    if !x.is_finite() || !(radius >= 0.0) {
        return None;
    }
    for level in 1..=62u32 {
        let base = 1usize << (level - 1);
        if base > limit {
            return None;
        }
        let scale = (1u64 << level) as f64;
        let top = (1i64 << level) - 1;
        let mut j = ((x - radius) * scale).floor() as i64 - 1;
        j = j.max(1);
        if j % 2 == 0 {
            j += 1;
        }
        while j <= top {
            let c = j as f64 / scale;
            if (x - c).abs() <= radius {
                let idx = base + ((j - 1) / 2) as usize;
                return (idx <= limit).then_some(idx);
            }
            if c > x + radius {
                break;
            }
            j += 2;
        }
    }
    None
}

/// Grid points of `[0,1]^dim` with denominator `2^level` and at least one odd
/// numerator, in lexicographic order.
fn box_level(dim: usize, level: u32) -> Vec<Point> {
    let side = (1u64 << level) - 1;
    let scale = (1u64 << level) as f64;
    let mut out = Vec::new();
    let mut digits = vec![1u64; dim];
    loop {
        if digits.iter().any(|d| d % 2 == 1) {
            out.push(Point::Vector(digits.iter().map(|&d| d as f64 / scale).collect()));
        }
        // last coordinate varies fastest
        let Some(pos) = (0..dim).rev().find(|&p| digits[p] < side) else {
            return out;
        };
        digits[pos] += 1;
        digits[pos + 1..].iter_mut().for_each(|d| *d = 1);
    }
}

/// Iterator over a space's dense enumeration.
pub struct DenseEnumeration {
    kind: SpaceKind,
    level: u32,
    buffer: std::vec::IntoIter<Point>,
}

impl DenseEnumeration {
    fn new(kind: SpaceKind) -> Self {
        DenseEnumeration { kind, level: 0, buffer: Vec::new().into_iter() }
    }

    fn refill(&mut self) {
        self.level += 1;
        let level = self.level;
        let pts: Vec<Point> = match &self.kind {
            SpaceKind::UnitInterval => {
                let scale = (1u64 << level) as f64;
                (1..(1u64 << level)).step_by(2).map(|j| Point::Scalar(j as f64 / scale)).collect()
            }
            SpaceKind::RealLine => {
                // level L (starting at 0) adds the multiples of 2^-L inside [-L, L]
                // that were not listed at level L - 1.
                let l = level - 1;
                let scale = (1u64 << l) as f64;
                let reach = (l as i64) << l;
                (-reach..=reach)
                    .filter(|m| l == 0 || m % 2 != 0 || m.unsigned_abs() > (((l - 1) as u64) << l))
                    .map(|m| Point::Scalar(m as f64 / scale))
                    .collect()
            }
            SpaceKind::UnitBox { dim } => box_level(*dim, level),
            SpaceKind::Discrete { size } => (0..*size).map(Point::Atom).collect(),
        };
        self.buffer = pts.into_iter();
    }
}

impl Iterator for DenseEnumeration {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        loop {
            if let Some(p) = self.buffer.next() {
                return Some(p);
            }
            self.refill();
        }
    }
}

/// One cell of a greedy cover: the closed ball around `center` minus all
/// earlier cells of the same cover.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverCell {
    pub index: usize,
    pub center: Point,
    pub radius: f64,
}

/// The first `len` cells of the greedy cover at scale `delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    space: MetricSpace,
    delta: f64,
    cells: Vec<CoverCell>,
}

impl Cover {
    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn radius(&self) -> f64 {
        self.delta / 2.0
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CoverCell] {
        &self.cells
    }

    /// Index of the cell containing `x`, if it is among the first `len` cells.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        self.space.first_ball_index(x, self.radius(), self.cells.len())
    }

    pub fn is_member(&self, index: usize, x: &Point) -> bool {
        self.locate(x) == Some(index)
    }

    /// Same cover, extended or truncated to `count` cells.
    pub fn resized(&self, count: usize) -> Cover {
        greedy_cover(&self.space, self.delta, count).expect("parameters already validated")
    }
}

/// First `count` cells of the greedy disjoint cover with diameter at most `delta`.
pub fn greedy_cover(space: &MetricSpace, delta: f64, count: usize) -> Result<Cover, SpaceError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(SpaceError::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if count == 0 {
        return Err(SpaceError::InvalidArgument("cell count must be at least 1".into()));
    }
    let radius = delta / 2.0;
    let cells = space
        .dense_points()
        .take(count)
        .enumerate()
        .map(|(i, center)| CoverCell { index: i + 1, center, radius })
        .collect();
    Ok(Cover { space: space.clone(), delta, cells })
}

/// Result of [`cover_for_process`].
#[derive(Clone, Debug)]
pub struct ProcessCover {
    /// Number of cells `M`.
    pub cells: usize,
    pub cover: Cover,
    /// Rollouts that left the first `M` cells.
    pub escapes: usize,
    pub trials: usize,
    /// One-sided upper confidence bound on the escape probability.
    pub escape_upper: f64,
}

/// Smallest `M >= min_count` such that rollouts of length `horizon` leave the
/// first `M` cells with probability certified below `epsilon`.
///
/// Trial `i` uses the sampler's replica stream `i`.
pub fn cover_for_process(
    space: &MetricSpace,
    sampler: &ProcessSampler,
    epsilon: f64,
    delta: f64,
    min_count: usize,
    horizon: usize,
    trials: usize,
) -> Result<ProcessCover, SpaceError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SpaceError::InvalidArgument(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if !(delta > 0.0) || min_count == 0 || horizon == 0 || trials == 0 {
        return Err(SpaceError::InvalidArgument("delta, min_count, horizon and trials must be positive".into()));
    }
    let radius = delta / 2.0;
    // Largest cell index touched by each rollout; COVER_CAP + 1 marks "beyond the cap".
    let mut reach: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            sampler
                .replica_rollout(trial as u64, horizon)
                .points
                .iter()
                .map(|x| space.first_ball_index(x, radius, COVER_CAP).unwrap_or(COVER_CAP + 1))
                .max()
                .unwrap_or(1)
        })
        .collect();
    reach.sort_unstable();

    // Most escapes whose upper bound still sits below epsilon.
    let n = trials as u64;
    let mut allowed = None;
    let (mut lo, mut hi) = (0u64, n);
    while lo <= hi {
        let mid = (lo + hi) / 2;
        if cp_upper(mid, n, CONFIDENCE) < epsilon {
            allowed = Some(mid);
            lo = mid + 1;
        } else if mid == 0 {
            break;
        } else {
            hi = mid - 1;
        }
    }
    let allowed = allowed.ok_or(SpaceError::InsufficientTrials { trials, epsilon })? as usize;
    // With M = reach[trials - allowed - 1], at most `allowed` rollouts exceed M.
    let needed = if allowed >= trials { 1 } else { reach[trials - allowed - 1] };
    let m = needed.max(min_count);
    if m > COVER_CAP {
        return Err(SpaceError::HorizonInsufficient { cap: COVER_CAP });
    }
    let escapes = reach.iter().filter(|&&r| r > m).count();
    Ok(ProcessCover {
        cells: m,
        cover: greedy_cover(space, delta, m)?,
        escapes,
        trials,
        escape_upper: cp_upper(escapes as u64, n, CONFIDENCE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Point {
        Point::Scalar(x)
    }

    #[test]
    fn unit_enumeration_order() {
        let got: Vec<f64> = MetricSpace::unit_interval().dense_points().take(7).map(|p| p.scalar().unwrap()).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125, 0.375, 0.625, 0.875]);
        for i in 1..200 {
            assert_eq!(
                MetricSpace::unit_interval().dense_point(i),
                MetricSpace::unit_interval().dense_points().nth(i - 1).unwrap()
            );
        }
    }

    #[test]
    fn real_line_enumeration_starts_at_origin_and_has_no_repeats() {
        let pts: Vec<Point> = MetricSpace::real_line().dense_points().take(400).collect();
        assert_eq!(pts[0], s(0.0));
        assert_eq!(&pts[1..5], &[s(-1.0), s(-0.5), s(0.5), s(1.0)]);
        let distinct: std::collections::HashSet<_> = pts.iter().collect();
        assert_eq!(distinct.len(), pts.len());
    }

    #[test]
    fn box_enumeration_levels() {
        let sp = MetricSpace::new(SpaceKind::UnitBox { dim: 2 }).unwrap();
        let pts: Vec<Point> = sp.dense_points().take(10).collect();
        assert_eq!(pts[0], Point::Vector(vec![0.5, 0.5]));
        // level 2 has 3x3 grid minus the already-listed centre
        assert_eq!(pts[1], Point::Vector(vec![0.25, 0.25]));
        assert!(!pts[1..9].contains(&Point::Vector(vec![0.5, 0.5])));
        assert_eq!(pts[9], Point::Vector(vec![0.125, 0.125]));
    }

    #[test]
    fn single_cell_covers_interval() {
        let cover = greedy_cover(&MetricSpace::unit_interval(), 1.0, 1).unwrap();
        assert_eq!(cover.cells()[0].center, s(0.5));
        for i in 0..=100 {
            assert_eq!(cover.locate(&s(i as f64 / 100.0)), Some(1));
        }
    }

    #[test]
    fn three_cells_at_half() {
        // expected cells: [1/4, 3/4], [0, 1/4), (3/4, 1]
        let cover = greedy_cover(&MetricSpace::unit_interval(), 0.5, 3).unwrap();
        let cases = [(0.25, 1), (0.5, 1), (0.75, 1), (0.0, 2), (0.2499, 2), (0.7501, 3), (1.0, 3)];
        for (x, cell) in cases {
            assert_eq!(cover.locate(&s(x)), Some(cell), "x = {x}");
        }
    }

    #[test]
    fn discrete_singletons() {
        let sp = MetricSpace::new(SpaceKind::Discrete { size: 3 }).unwrap();
        let cover = greedy_cover(&sp, 0.5, 3).unwrap();
        for a in 0..3 {
            assert_eq!(cover.locate(&Point::Atom(a)), Some(a + 1));
        }
        // past the end the enumeration cycles and later cells are empty
        let longer = greedy_cover(&sp, 0.5, 6).unwrap();
        assert_eq!(longer.locate(&Point::Atom(2)), Some(3));
    }

    #[test]
    fn analytic_first_ball_matches_scan() {
        let sp = MetricSpace::unit_interval();
        for r in [0.3, 0.05, 1.0 / 64.0, 0.013] {
            for i in 0..=257 {
                let x = s(i as f64 / 257.0);
                assert_eq!(
                    sp.first_ball_index(&x, r, 5000),
                    sp.first_ball_index_by_scan(&x, r, 5000),
                    "x = {x:?}, r = {r}"
                );
            }
        }
    }

    #[test]
    fn invalid_cover_arguments() {
        let sp = MetricSpace::unit_interval();
        assert!(greedy_cover(&sp, 0.0, 3).is_err());
        assert!(greedy_cover(&sp, 0.1, 0).is_err());
    }

    #[test]
    fn point_equality_is_exact() {
        assert_eq!(s(0.0), s(-0.0));
        assert_ne!(s(0.1), s(0.1 + f64::EPSILON));
        assert!(s(0.2) < s(0.3));
        assert!(s(5.0) < Point::Atom(0));
    }
}
