//! Randomized countable partitions: interval unions `B_k` on the unit
//! interval and sampled cover cells on a general space, with schedule
//! estimation, truncated cell lookup, and Monte-Carlo checks of the miss and
//! tail bounds.
//!
//! A unit-interval level with `n = ⌈μ_k/δ_k⌉` intervals is realized either
//! explicitly (all `n` centers drawn) or restricted to a finite support `S`.
//! The restricted form draws the number of centers landing within `δ_k/2` of
//! `S` as Binomial(n, |U|), `U` being that neighbourhood, then places each one
//! uniformly in `U`. Membership of the points of `S` then has exactly the law
//! of the explicit construction, while `n` may be astronomically large.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Binomial, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::metric_space::{cover_for_process, Cover, MetricSpace, Point, SpaceError};
use crate::process::{ProcessSampler, SupportClass};
use crate::seeding;
use crate::stats::{cp_lower, frequency, Summary, CONFIDENCE};

pub const DEFAULT_K_MAX: usize = 8;
/// Largest interval count realized explicitly by `build_unit_interval`.
pub const EXPLICIT_CAP: f64 = (1u64 << 24) as f64;
/// Monte-Carlo checks realize explicitly up to this many intervals per
/// partition and switch to the restricted form above it.
pub const MC_EXPLICIT_CAP: f64 = 4096.0;
const MAX_LANDED: u64 = 1 << 26;
const EXACT_INT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("finite-support-process: the schedule is undefined for a finitely supported process")]
    FiniteSupportProcess,
    #[error("horizon-insufficient: level {level} not certified within {horizon} rounds")]
    HorizonInsufficient { level: usize, horizon: usize },
    #[error("insufficient trials: {trials} rollouts cannot certify level {level}")]
    InsufficientTrials { level: usize, trials: usize },
    #[error("cover-too-small: level {level} has M = {m} < {required}")]
    CoverTooSmall { level: usize, m: usize, required: usize },
    #[error("hypothesis-violated: {0}")]
    HypothesisViolated(String),
    #[error("level {level} needs {count:e} intervals; realize it on a finite support instead")]
    TooManyIntervals { level: usize, count: f64 },
    #[error("point {0} is outside the support this partition was realized on")]
    Unrealized(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

pub fn mu(level: usize) -> f64 {
    0.5f64.powi(level as i32 + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleLevel {
    pub level: usize,
    pub mu: f64,
    /// Estimated horizon `N_k`, when the schedule came from a process.
    pub horizon: Option<usize>,
    pub delta: f64,
    /// `⌈μ_k/δ_k⌉`, exact while below 2^53.
    pub count: f64,
    /// Index range `(i_{k-1}, i_k]` of the centers used by this level.
    pub first_index: f64,
    pub last_index: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSchedule {
    levels: Vec<ScheduleLevel>,
}

impl PartitionSchedule {
    pub fn from_deltas(deltas: &[f64]) -> Result<Self, PartitionError> {
        Self::build(deltas, None)
    }

    pub fn with_horizons(deltas: &[f64], horizons: &[usize]) -> Result<Self, PartitionError> {
        if deltas.len() != horizons.len() {
            return Err(PartitionError::InvalidSchedule("deltas and horizons differ in length".into()));
        }
        Self::build(deltas, Some(horizons))
    }

    /// `δ_k = 2^-(k + offset)`, valid for `offset >= 2`.
    pub fn dyadic(k_max: usize, offset: i32) -> Result<Self, PartitionError> {
        let deltas: Vec<f64> = (1..=k_max).map(|k| 0.5f64.powi(k as i32 + offset)).collect();
        Self::from_deltas(&deltas)
    }

    fn build(deltas: &[f64], horizons: Option<&[usize]>) -> Result<Self, PartitionError> {
        if deltas.is_empty() {
            return Err(PartitionError::InvalidSchedule("no levels".into()));
        }
        let mut levels = Vec::with_capacity(deltas.len());
        let mut index = 0.0;
        for (i, &delta) in deltas.iter().enumerate() {
            let k = i + 1;
            let mu = mu(k);
            if !(delta > 0.0 && delta < mu) {
                return Err(PartitionError::InvalidSchedule(format!("delta_{k} = {delta:e} must lie in (0, {mu})")));
            }
            let count = (mu / delta).ceil();
            if !count.is_finite() {
                return Err(PartitionError::InvalidSchedule(format!("delta_{k} = {delta:e} is too small")));
            }
            levels.push(ScheduleLevel {
                level: k,
                mu,
                horizon: horizons.map(|h| h[i]),
                delta,
                count,
                first_index: index,
                last_index: index + count,
            });
            index += count;
        }
        Ok(PartitionSchedule { levels })
    }

    pub fn k_max(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[ScheduleLevel] {
        &self.levels
    }

    /// Level `k`, 1-based.
    pub fn level(&self, k: usize) -> &ScheduleLevel {
        &self.levels[k - 1]
    }

    pub fn total_count(&self) -> f64 {
        self.levels.iter().map(|l| l.count).sum()
    }
}

/// Smallest success count whose lower confidence bound clears `target`.
fn certifying_successes(n: usize, target: f64) -> Option<usize> {
    if n == 0 || cp_lower(n as u64, n as u64, CONFIDENCE) < target {
        return None;
    }
    let (mut lo, mut hi) = (1usize, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if cp_lower(mid as u64, n as u64, CONFIDENCE) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

fn min_scalar_gap(prefix: &[Point]) -> Option<f64> {
    let mut xs: Vec<f64> = prefix.iter().filter_map(Point::scalar).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
}

/// Estimates `(N_k, δ_k)` from `trials` rollouts, keeping only rollouts in
/// the infinite-support event.
///
/// `N_k` is the smallest horizon at which at least `2^(2k+2)` distinct values
/// have appeared with probability at least `1 - 2^-(k+1)` (0.99 lower
/// confidence bound); `δ_k` is half the empirical `2^-(k+1)` quantile of the
/// minimal gap at horizon `N_k`, clamped to `2^-(k+2)`.
pub fn estimate_schedule(
    sampler: &ProcessSampler,
    k_max: usize,
    trials: usize,
    max_horizon: usize,
) -> Result<PartitionSchedule, PartitionError> {
    if let SupportClass::CertainlyFinite { .. } = sampler.support_class() {
        return Err(PartitionError::FiniteSupportProcess);
    }
    if k_max == 0 {
        return Err(PartitionError::InvalidSchedule("k_max must be positive".into()));
    }
    if trials < 1000 {
        return Err(PartitionError::InsufficientTrials { level: 1, trials });
    }
    let targets: Vec<usize> = (1..=k_max).map(|k| 1usize << (2 * k + 2)).collect();
    let hitting: Vec<Vec<Option<usize>>> = (0..trials as u64)
        .into_par_iter()
        .filter_map(|trial| {
            let mut stream = sampler.replica(trial).stream();
            if !stream.infinite_event() {
                return None;
            }
            let mut seen = HashSet::new();
            let mut hits = vec![None; k_max];
            let mut next = 0;
            for t in 1..=max_horizon {
                let Some(x) = stream.next() else { break };
                if seen.insert(x) {
                    while next < k_max && seen.len() >= targets[next] {
                        hits[next] = Some(t);
                        next += 1;
                    }
                    if next == k_max {
                        break;
                    }
                }
            }
            Some(hits)
        })
        .collect();
    let n_event = hitting.len();

    let mut horizons = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let required = certifying_successes(n_event, 1.0 - 0.5f64.powi(k as i32 + 1))
            .ok_or(PartitionError::InsufficientTrials { level: k, trials: n_event })?;
        let mut times: Vec<usize> = hitting.iter().map(|h| h[k - 1].unwrap_or(usize::MAX)).collect();
        times.sort_unstable();
        let n_k = times[required - 1];
        if n_k == usize::MAX {
            return Err(PartitionError::HorizonInsufficient { level: k, horizon: max_horizon });
        }
        horizons.push(n_k);
    }

    let longest = *horizons.last().expect("k_max > 0");
    let gaps: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .filter_map(|trial| {
            let mut stream = sampler.replica(trial).stream();
            if !stream.infinite_event() {
                return None;
            }
            let prefix: Vec<Point> = stream.by_ref().take(longest).collect();
            Some(horizons.iter().map(|&n| min_scalar_gap(&prefix[..n]).unwrap_or(f64::INFINITY)).collect())
        })
        .collect();
    let mut deltas = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut level_gaps: Vec<f64> = gaps.iter().map(|g| g[k - 1]).collect();
        level_gaps.sort_by(f64::total_cmp);
        let rank = ((0.5f64.powi(k as i32 + 1) * n_event as f64).ceil() as usize).max(1);
        let delta = (level_gaps[rank - 1] / 2.0).min(0.5f64.powi(k as i32 + 2));
        if !(delta > 0.0) {
            return Err(PartitionError::InvalidSchedule(format!("gap at level {k} underflows")));
        }
        deltas.push(delta);
    }
    PartitionSchedule::with_horizons(&deltas, &horizons)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionForm {
    UnitInterval,
    GeneralCover,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LevelBody {
    /// Every center, in draw order, plus a sorted copy for lookups.
    Explicit { centers: Vec<f64>, sorted: Vec<f64> },
    /// Membership known only on `support` (sorted, distinct); `centers` holds
    /// the centers that landed near it.
    Restricted { support: Vec<f64>, covered: Vec<bool>, centers: Vec<f64> },
    /// Indices into `cover` of the sampled cells, in draw order.
    Cells { cover: Cover, drawn: Vec<usize>, chosen: Vec<bool> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealizedLevel {
    pub level: usize,
    pub delta: f64,
    pub body: LevelBody,
}

impl RealizedLevel {
    fn radius(&self) -> f64 {
        self.delta / 2.0
    }

    pub fn contains(&self, x: &Point) -> Result<bool, PartitionError> {
        match &self.body {
            LevelBody::Explicit { sorted, .. } => {
                let x = unit_scalar(x)?;
                let r = self.radius();
                let at = sorted.partition_point(|&c| c < x);
                let above = sorted.get(at).is_some_and(|&c| (c - r).max(0.0) <= x);
                let below = at > 0 && (sorted[at - 1] + r).min(1.0) >= x;
                Ok(above || below)
            }
            LevelBody::Restricted { support, covered, .. } => {
                let x = unit_scalar(x)?;
                match support.binary_search_by(|s| s.total_cmp(&x)) {
                    Ok(i) => Ok(covered[i]),
                    Err(_) => Err(PartitionError::Unrealized(x)),
                }
            }
            LevelBody::Cells { cover, chosen, .. } => Ok(cover.locate(x).is_some_and(|i| chosen[i])),
        }
    }

    /// Intervals `[q - δ/2, q + δ/2] ∩ [0, 1]` in center order.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let r = self.radius();
        let centers = match &self.body {
            LevelBody::Explicit { centers, .. } | LevelBody::Restricted { centers, .. } => centers,
            LevelBody::Cells { .. } => return Vec::new(),
        };
        centers.iter().map(|&q| ((q - r).max(0.0), (q + r).min(1.0))).collect()
    }

    /// Length of the merged intervals; only defined for explicit levels.
    pub fn measure(&self) -> Option<f64> {
        let LevelBody::Explicit { sorted, .. } = &self.body else { return None };
        let r = self.radius();
        let mut total = 0.0;
        let mut current: Option<(f64, f64)> = None;
        for &q in sorted {
            let (lo, hi) = ((q - r).max(0.0), (q + r).min(1.0));
            current = match current {
                Some((a, b)) if lo <= b => Some((a, b.max(hi))),
                Some((a, b)) => {
                    total += b - a;
                    Some((lo, hi))
                }
                None => Some((lo, hi)),
            };
        }
        if let Some((a, b)) = current {
            total += b - a;
        }
        Some(total)
    }
}

fn unit_scalar(x: &Point) -> Result<f64, PartitionError> {
    match x {
        Point::Scalar(v) if (0.0..=1.0).contains(v) => Ok(*v),
        other => Err(PartitionError::HypothesisViolated(format!("{other:?} is not a point of [0, 1]"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CellIndex {
    /// `0` for points outside every `B_l`, else the last level containing it.
    Cell(u32),
    /// Inside `B_{K_max}`: the cell depends on levels beyond the truncation.
    TailUndetermined,
}

impl std::fmt::Display for CellIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CellIndex::Cell(k) => write!(f, "{k}"),
            CellIndex::TailUndetermined => f.write_str("tail"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Visits {
    /// `level_hits[k - 1]` is set when the prefix meets `B_k`.
    pub level_hits: Vec<bool>,
    pub cells: BTreeSet<CellIndex>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomPartition {
    form: PartitionForm,
    levels: Vec<RealizedLevel>,
}

impl RandomPartition {
    /// Realizes every level explicitly; levels above `EXPLICIT_CAP`
    /// intervals are refused.
    pub fn build_unit_interval(schedule: &PartitionSchedule, seed: u64) -> Result<Self, PartitionError> {
        let levels = schedule
            .levels()
            .iter()
            .map(|l| {
                if l.count > EXPLICIT_CAP {
                    return Err(PartitionError::TooManyIntervals { level: l.level, count: l.count });
                }
                Ok(explicit_level(l, seed))
            })
            .collect::<Result<_, _>>()?;
        Ok(RandomPartition { form: PartitionForm::UnitInterval, levels })
    }

    /// Realizes every level restricted to `support`; lookups outside it fail.
    pub fn build_unit_interval_on(
        schedule: &PartitionSchedule,
        support: &[f64],
        seed: u64,
    ) -> Result<Self, PartitionError> {
        let mut support: Vec<f64> = support.to_vec();
        if let Some(bad) = support.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(PartitionError::HypothesisViolated(format!("{bad} is not a point of [0, 1]")));
        }
        support.sort_by(f64::total_cmp);
        support.dedup();
        let levels = schedule.levels().iter().map(|l| restricted_level(l, &support, seed)).collect::<Result<_, _>>()?;
        Ok(RandomPartition { form: PartitionForm::UnitInterval, levels })
    }

    /// Explicit when the whole schedule fits under `cap` intervals, else
    /// restricted to `support`.
    pub fn build_for_support(
        schedule: &PartitionSchedule,
        support: &[f64],
        seed: u64,
        cap: f64,
    ) -> Result<Self, PartitionError> {
        if schedule.total_count() <= cap {
            Self::build_unit_interval(schedule, seed)
        } else {
            Self::build_unit_interval_on(schedule, support, seed)
        }
    }

    /// Fixed centers per level; used for worked examples.
    pub fn from_centers(schedule: &PartitionSchedule, centers: Vec<Vec<f64>>) -> Result<Self, PartitionError> {
        if centers.len() != schedule.k_max() {
            return Err(PartitionError::InvalidSchedule("one center list per level".into()));
        }
        let levels = schedule
            .levels()
            .iter()
            .zip(centers)
            .map(|(l, centers)| {
                if centers.len() as f64 != l.count {
                    return Err(PartitionError::InvalidSchedule(format!(
                        "level {} needs {} centers, got {}",
                        l.level,
                        l.count,
                        centers.len()
                    )));
                }
                let mut sorted = centers.clone();
                sorted.sort_by(f64::total_cmp);
                Ok(RealizedLevel { level: l.level, delta: l.delta, body: LevelBody::Explicit { centers, sorted } })
            })
            .collect::<Result<_, _>>()?;
        Ok(RandomPartition { form: PartitionForm::UnitInterval, levels })
    }

    /// Level `k` (1-based) unions `b_k = ⌈2^(-k-2) M⌉` cells drawn uniformly
    /// with replacement from the `k`-th cover, `M` being its size.
    pub fn build_general(covers: Vec<Cover>, seed: u64) -> Result<Self, PartitionError> {
        let levels = covers
            .into_iter()
            .enumerate()
            .map(|(i, cover)| {
                let k = i + 1;
                let m = cover.len();
                let required = 1usize << (k + 2);
                if m < required {
                    return Err(PartitionError::CoverTooSmall { level: k, m, required });
                }
                let b = sampled_cells(k, m);
                let mut rng = seeding::stream(seed, &[k as u64]);
                let drawn: Vec<usize> = (0..b).map(|_| rng.random_range(0..m)).collect();
                let mut chosen = vec![false; m];
                for &d in &drawn {
                    chosen[d] = true;
                }
                Ok(RealizedLevel { level: k, delta: cover.delta(), body: LevelBody::Cells { cover, drawn, chosen } })
            })
            .collect::<Result<_, _>>()?;
        Ok(RandomPartition { form: PartitionForm::GeneralCover, levels })
    }

    pub fn form(&self) -> PartitionForm {
        self.form
    }

    pub fn k_max(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[RealizedLevel] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &RealizedLevel {
        &self.levels[k - 1]
    }

    pub fn in_level(&self, k: usize, x: &Point) -> Result<bool, PartitionError> {
        self.levels[k - 1].contains(x)
    }

    pub fn cell_index(&self, x: &Point) -> Result<CellIndex, PartitionError> {
        let mut last = 0;
        for level in &self.levels {
            if level.contains(x)? {
                last = level.level;
            }
        }
        Ok(if last == self.k_max() { CellIndex::TailUndetermined } else { CellIndex::Cell(last as u32) })
    }

    pub fn visited_cells(&self, prefix: &[Point]) -> Result<Visits, PartitionError> {
        let mut level_hits = vec![false; self.k_max()];
        let mut cells = BTreeSet::new();
        for x in prefix {
            let mut last = 0;
            for level in &self.levels {
                if level.contains(x)? {
                    level_hits[level.level - 1] = true;
                    last = level.level;
                }
            }
            cells.insert(if last == self.k_max() { CellIndex::TailUndetermined } else { CellIndex::Cell(last as u32) });
        }
        Ok(Visits { level_hits, cells })
    }

    /// One line per level: `k delta lo hi lo hi ...` for interval levels,
    /// `k delta i j ...` (1-based cell indices) for cover levels.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for level in &self.levels {
            write!(out, "{} {:.16e}", level.level, level.delta).expect("string write");
            match &level.body {
                LevelBody::Cells { drawn, .. } => {
                    for d in drawn {
                        write!(out, " {}", d + 1).expect("string write");
                    }
                }
                _ => {
                    for (lo, hi) in level.intervals() {
                        write!(out, " {lo:.16e} {hi:.16e}").expect("string write");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn sampled_cells(level: usize, m: usize) -> usize {
    (m as f64 * 0.5f64.powi(level as i32 + 2)).ceil() as usize
}

fn explicit_level(l: &ScheduleLevel, seed: u64) -> RealizedLevel {
    let mut rng = seeding::stream(seed, &[l.level as u64]);
    let centers: Vec<f64> = (0..l.count as u64).map(|_| rng.random::<f64>()).collect();
    let mut sorted = centers.clone();
    sorted.sort_by(f64::total_cmp);
    RealizedLevel { level: l.level, delta: l.delta, body: LevelBody::Explicit { centers, sorted } }
}

fn restricted_level(l: &ScheduleLevel, support: &[f64], seed: u64) -> Result<RealizedLevel, PartitionError> {
    let r = l.delta / 2.0;
    let mut rng = seeding::stream(seed, &[l.level as u64, seeding::tag("restricted")]);
    // Components of the r-neighbourhood of the support: (first, last, measure).
    let mut comps: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &x) in support.iter().enumerate() {
        match comps.last_mut() {
            Some(c) if x - support[c.1] <= 2.0 * r => c.1 = i,
            _ => comps.push((i, i, 0.0)),
        }
    }
    for c in &mut comps {
        let (a, b) = (support[c.0], support[c.1]);
        c.2 = r.min(a) + (b - a) + r.min(1.0 - b);
    }
    let total: f64 = comps.iter().map(|c| c.2).sum();
    let p = total.min(1.0);
    let landed = if p <= 0.0 {
        0
    } else if l.count <= EXACT_INT {
        Binomial::new(l.count as u64, p).expect("valid binomial").sample(&mut rng)
    } else if p >= 1.0 {
        return Err(PartitionError::TooManyIntervals { level: l.level, count: l.count });
    } else {
        // Binomial with n beyond 2^53: the Poisson limit is off by at most p in
        // total variation, and p is the measure of a vanishing neighbourhood.
        let lambda = l.count * p;
        if lambda > MAX_LANDED as f64 {
            return Err(PartitionError::TooManyIntervals { level: l.level, count: l.count });
        }
        Poisson::new(lambda).expect("valid poisson").sample(&mut rng) as u64
    };
    if landed > MAX_LANDED {
        return Err(PartitionError::TooManyIntervals { level: l.level, count: l.count });
    }
    let mut covered = vec![false; support.len()];
    let mut centers = Vec::with_capacity(landed as usize);
    if landed > 0 {
        let pick = WeightedIndex::new(comps.iter().map(|c| c.2)).expect("positive measures");
        for _ in 0..landed {
            let (first, last, measure) = comps[pick.sample(&mut rng)];
            let a = support[first];
            // Offsets are kept relative to the component's first point so that
            // radii far below the spacing of f64 near `a` stay resolvable.
            let offset = rng.random::<f64>() * measure - r.min(a);
            let rel = |j: usize| support[j] - a;
            let lo = first + (first..=last).map(rel).take_while(|&d| d < offset - r).count();
            for (j, flag) in covered.iter_mut().enumerate().take(last + 1).skip(lo) {
                let d = rel(j);
                if d > offset + r {
                    break;
                }
                if (d - offset).abs() <= r {
                    *flag = true;
                }
            }
            centers.push(a + offset);
        }
    }
    Ok(RealizedLevel {
        level: l.level,
        delta: l.delta,
        body: LevelBody::Restricted { support: support.to_vec(), covered, centers },
    })
}

/// Covers for the general construction: level `k` uses `ε_k = 2^-(k+3)`,
/// the schedule's `δ_k`, and at least `m₀ = 2^(k+2)` cells.
pub fn covers_for_levels(
    space: &MetricSpace,
    sampler: &ProcessSampler,
    schedule: &PartitionSchedule,
    horizon: usize,
    trials: usize,
) -> Result<Vec<Cover>, PartitionError> {
    schedule
        .levels()
        .iter()
        .map(|l| {
            let epsilon = 0.5f64.powi(l.level as i32 + 3);
            let m0 = 1usize << (l.level + 2);
            Ok(cover_for_process(space, sampler, epsilon, l.delta, m0, horizon, trials)?.cover)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lemma1Report {
    pub level: usize,
    pub trials: usize,
    pub misses: u64,
    pub miss: Summary,
    /// `e^(-2^(k+1))`.
    pub bound: f64,
}

/// Redraws level `k` `trials` times and counts the draws where `B_k` misses
/// every point of `set`.
pub fn mc_check_lemma1(
    schedule: &PartitionSchedule,
    level: usize,
    set: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Lemma1Report, PartitionError> {
    if level == 0 || level > schedule.k_max() {
        return Err(PartitionError::InvalidSchedule(format!("level {level} outside 1..={}", schedule.k_max())));
    }
    let l = schedule.level(level);
    let mut s = set.to_vec();
    s.sort_by(f64::total_cmp);
    let required = 1usize << (2 * level + 2);
    if s.len() <= required {
        return Err(PartitionError::HypothesisViolated(format!("#S = {} must exceed {required}", s.len())));
    }
    if let Some(bad) = s.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(PartitionError::HypothesisViolated(format!("{bad} is not a point of [0, 1]")));
    }
    if let Some(w) = s.windows(2).find(|w| w[1] - w[0] <= l.delta) {
        return Err(PartitionError::HypothesisViolated(format!(
            "gap {:e} between {} and {} is not above delta = {:e}",
            w[1] - w[0],
            w[0],
            w[1],
            l.delta
        )));
    }
    let points: Vec<Point> = s.iter().map(|&x| Point::Scalar(x)).collect();
    let misses = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = seeding::derive(seed, &[trial]);
            let level_body = if l.count <= MC_EXPLICIT_CAP {
                explicit_level(l, trial_seed)
            } else {
                restricted_level(l, &s, trial_seed).expect("bounded landing count")
            };
            let hit = points.iter().any(|x| level_body.contains(x).expect("point of the realized support"));
            u64::from(!hit)
        })
        .sum();
    Ok(Lemma1Report {
        level,
        trials,
        misses,
        miss: frequency(misses, trials as u64),
        bound: (-(2f64.powi(level as i32 + 1))).exp(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailRow {
    pub point: f64,
    pub level: usize,
    pub hits: u64,
    pub member: Summary,
    /// `2^-(k-1)`.
    pub bound: f64,
}

/// Frequency of `x ∈ R_k = ∪_{k <= l <= K_max} B_l` per point and level.
pub fn mc_check_tail(
    schedule: &PartitionSchedule,
    points: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<TailRow>, PartitionError> {
    if trials == 0 {
        return Ok(Vec::new());
    }
    let k_max = schedule.k_max();
    // memberships[trial][point][level - 1]
    let memberships: Vec<Vec<Vec<bool>>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let p =
                RandomPartition::build_for_support(schedule, points, seeding::derive(seed, &[trial]), MC_EXPLICIT_CAP)?;
            points
                .iter()
                .map(|&x| (1..=k_max).map(|k| p.in_level(k, &Point::Scalar(x))).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (i, &x) in points.iter().enumerate() {
        for k in 1..=k_max {
            let hits = memberships.iter().filter(|m| m[i][k - 1..].iter().any(|&b| b)).count() as u64;
            rows.push(TailRow {
                point: x,
                level: k,
                hits,
                member: frequency(hits, trials as u64),
                bound: 0.5f64.powi(k as i32 - 1),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FmvRow {
    pub level: usize,
    pub horizon: usize,
    pub hits: u64,
    pub trials: usize,
    pub hit: Summary,
    /// `1 - (2^-k + e^(-2^(k+1)))`.
    pub bound: f64,
}

/// Paired redraws of (process prefix, partition): how often `B_k` meets
/// `X_{<=N_k}`, over rollouts in the infinite-support event.
pub fn fmv_hit_frequencies(
    sampler: &ProcessSampler,
    schedule: &PartitionSchedule,
    trials: usize,
    seed: u64,
) -> Result<Vec<FmvRow>, PartitionError> {
    let horizons: Vec<usize> = schedule
        .levels()
        .iter()
        .map(|l| l.horizon.ok_or_else(|| PartitionError::InvalidSchedule("schedule has no horizons".into())))
        .collect::<Result<_, _>>()?;
    let longest = horizons.iter().copied().max().unwrap_or(0);
    let flags: Vec<Option<Vec<bool>>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut stream = sampler.replica(trial).stream();
            if !stream.infinite_event() {
                return Ok(None);
            }
            let prefix: Vec<Point> = stream.by_ref().take(longest).collect();
            let support: Vec<f64> = prefix.iter().filter_map(Point::scalar).collect();
            let p = RandomPartition::build_for_support(
                schedule,
                &support,
                seeding::derive(seed, &[trial]),
                MC_EXPLICIT_CAP,
            )?;
            let mut hits = Vec::with_capacity(horizons.len());
            for (k, &n) in horizons.iter().enumerate() {
                let mut hit = false;
                for x in &prefix[..n] {
                    if p.in_level(k + 1, x)? {
                        hit = true;
                        break;
                    }
                }
                hits.push(hit);
            }
            Ok(Some(hits))
        })
        .collect::<Result<_, PartitionError>>()?;
    let kept: Vec<Vec<bool>> = flags.into_iter().flatten().collect();
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let k = i + 1;
            let hits = kept.iter().filter(|f| f[i]).count() as u64;
            FmvRow {
                level: k,
                horizon: n,
                hits,
                trials: kept.len(),
                hit: frequency(hits, kept.len() as u64),
                bound: 1.0 - (0.5f64.powi(k as i32) + (-(2f64.powi(k as i32 + 1))).exp()),
            }
        })
        .collect())
}
