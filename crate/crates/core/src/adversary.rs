//! Constructive adversaries: a cell-wise random target that defeats any
//! learner on a process visiting infinitely many cells, and a process that
//! fools any hypothesis test for finite support.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use thiserror::Error;

use crate::learner::{run_online, LabelSource, OnlineLearner, Predictor, RuleKind};
use crate::loss::{LossError, LossModel, Value};
use crate::metric_space::{MetricSpace, Point};
use crate::partition::{CellIndex, PartitionError, RandomPartition};
use crate::process::ProcessSampler;
use crate::seeding;
use crate::stats::{aggregate, cp_lower, cp_upper, quantile_upper_rank, Estimator, Summary, CONFIDENCE};

pub const MIN_DEFEAT_RUNS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum AdversaryError {
    #[error("horizon-insufficient: only {hit} of {levels} levels visited within {horizon} rounds")]
    HorizonInsufficient { hit: usize, levels: usize, horizon: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("pair at level {level} has loss {gap} below {required}")]
    GapViolated { level: usize, gap: f64, required: f64 },
    #[error("test-nonconvergent: switch {switch} not certified by n = {cap}")]
    TestNonconvergent { switch: usize, cap: usize },
    #[error("need at least {MIN_DEFEAT_RUNS} runs, got {0}")]
    TooFewRuns(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Level of the cell holding `x`; tail points belong to the deepest level.
pub fn cell_level(partition: &RandomPartition, x: &Point) -> Result<usize, PartitionError> {
    Ok(match partition.cell_index(x)? {
        CellIndex::Cell(k) => k as usize,
        CellIndex::TailUndetermined => partition.k_max(),
    })
}

/// First round (1-based) at which the prefix enters each level `0..=K_max`.
pub fn first_visits(partition: &RandomPartition, prefix: &[Point]) -> Result<Vec<Option<usize>>, PartitionError> {
    let mut out = vec![None; partition.k_max() + 1];
    for (t, x) in prefix.iter().enumerate() {
        let k = cell_level(partition, x)?;
        if out[k].is_none() {
            out[k] = Some(t + 1);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelThreshold {
    pub level: usize,
    /// `T_k`; zero for unreachable levels.
    pub threshold: usize,
    pub reachable: bool,
    /// False when the trials could not certify the quantile and the sample
    /// maximum was used instead.
    pub certified: bool,
    pub visits: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstVisitThresholds {
    pub levels: Vec<LevelThreshold>,
}

impl FirstVisitThresholds {
    pub fn threshold(&self, level: usize) -> usize {
        self.levels[level].threshold
    }
}

/// Distinct scalar values of the first `replicas` rollouts, for realizing a
/// partition restricted to what those rollouts can visit.
pub fn rollout_support(sampler: &ProcessSampler, replicas: usize, horizon: usize) -> Vec<f64> {
    let mut seen: HashSet<Point> = HashSet::new();
    for r in 0..replicas as u64 {
        seen.extend(sampler.replica_rollout(r, horizon).points);
    }
    let mut out: Vec<f64> = seen.iter().filter_map(Point::scalar).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// `T_k` is an upper 0.99 confidence bound on the `(1 - 2^-k)`-quantile of
/// the first-visit time `τ_k`, with `τ_k = 0` on rollouts that never enter
/// level `k`.
pub fn estimate_first_visit_thresholds(
    sampler: &ProcessSampler,
    partition: &RandomPartition,
    trials: usize,
    horizon: usize,
) -> Result<FirstVisitThresholds, AdversaryError> {
    if trials == 0 || horizon == 0 {
        return Err(AdversaryError::Invalid("trials and horizon must be positive".into()));
    }
    let k_max = partition.k_max();
    let visits: Vec<Vec<Option<usize>>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| first_visits(partition, &sampler.replica_rollout(trial, horizon).points))
        .collect::<Result<_, _>>()?;
    let levels: Vec<LevelThreshold> = (0..=k_max)
        .map(|k| {
            let mut taus: Vec<usize> = visits.iter().map(|v| v[k].unwrap_or(0)).collect();
            taus.sort_unstable();
            let visited = visits.iter().filter(|v| v[k].is_some()).count();
            if visited == 0 {
                return LevelThreshold { level: k, threshold: 0, reachable: false, certified: true, visits: 0, trials };
            }
            let q = 1.0 - 0.5f64.powi(k as i32);
            let (threshold, certified) = match quantile_upper_rank(trials, q, CONFIDENCE) {
                Some(rank) => (taus[rank - 1], true),
                None => (taus[trials - 1], false),
            };
            LevelThreshold { level: k, threshold, reachable: true, certified, visits: visited, trials }
        })
        .collect();
    let hit = levels[1..].iter().filter(|l| l.reachable).count();
    if 2 * hit < k_max {
        return Err(AdversaryError::HorizonInsufficient { hit, levels: k_max, horizon });
    }
    Ok(FirstVisitThresholds { levels })
}

/// Cell-wise random target: on level `k` it takes `pairs[k].0` or
/// `pairs[k].1` by a fair coin, the two being at loss `>= 2 c T_k`.
#[derive(Clone, Debug)]
pub struct AdversarialTarget {
    partition: Arc<RandomPartition>,
    pairs: Vec<(Value, Value)>,
    coins: Vec<bool>,
}

impl AdversarialTarget {
    pub fn pairs(&self) -> &[(Value, Value)] {
        &self.pairs
    }

    pub fn coins(&self) -> &[bool] {
        &self.coins
    }

    pub fn try_value(&self, x: &Point) -> Result<Value, PartitionError> {
        let k = cell_level(&self.partition, x)?;
        let (a, b) = &self.pairs[k];
        Ok(if self.coins[k] { b.clone() } else { a.clone() })
    }
}

impl Predictor for AdversarialTarget {
    fn value(&self, x: &Point) -> Value {
        self.try_value(x).unwrap_or_else(|e| panic!("adversarial target undefined: {e}"))
    }
}

impl LabelSource for AdversarialTarget {
    fn label(&self, x: &Point, _rng: &mut dyn RngCore) -> Value {
        self.value(x)
    }
}

pub fn sample_adversarial_target(
    partition: Arc<RandomPartition>,
    thresholds: &FirstVisitThresholds,
    loss: &LossModel,
    seed: u64,
) -> Result<AdversarialTarget, AdversaryError> {
    if thresholds.levels.len() != partition.k_max() + 1 {
        return Err(AdversaryError::Invalid("one threshold per level 0..=K_max".into()));
    }
    let c = loss.c_relaxed();
    let mut pairs = Vec::with_capacity(thresholds.levels.len());
    for l in &thresholds.levels {
        let required = 2.0 * c * l.threshold as f64;
        let pair = loss.witness_pair(required)?;
        let gap = loss.evaluate(&pair.0, &pair.1);
        if gap < required {
            return Err(AdversaryError::GapViolated { level: l.level, gap, required });
        }
        pairs.push(pair);
    }
    let mut rng = seeding::stream(seed, &[seeding::tag("coins")]);
    let coins = (0..pairs.len()).map(|_| rng.random_bool(0.5)).collect();
    Ok(AdversarialTarget { partition, pairs, coins })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Challenger {
    Rule(RuleKind),
    /// Predicts the target itself.
    Oracle,
}

impl Challenger {
    pub fn name(&self) -> &'static str {
        match self {
            Challenger::Rule(k) => k.as_str(),
            Challenger::Oracle => "oracle",
        }
    }
}

struct OracleRule(AdversarialTarget);

impl OnlineLearner for OracleRule {
    fn predict(&self, x: &Point) -> Value {
        self.0.value(x)
    }

    fn observe(&mut self, _x: &Point, _y: &Value) {}

    fn name(&self) -> &'static str {
        "oracle"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefeatRow {
    pub level: usize,
    pub threshold: usize,
    /// Runs whose rollout entered the level within the horizon.
    pub visits: usize,
    pub first_visit_loss: Option<Summary>,
    /// Running average loss at round `τ_k`.
    pub running_average: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefeatReport {
    pub challenger: Challenger,
    pub runs: usize,
    pub rows: Vec<DefeatRow>,
}

/// Runs the challenger against a freshly flipped target per run and reports,
/// per level, the loss at the first visit and the running average there.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_defeat(
    challenger: Challenger,
    sampler: &ProcessSampler,
    partition: Arc<RandomPartition>,
    thresholds: &FirstVisitThresholds,
    loss: &LossModel,
    space: &MetricSpace,
    runs: usize,
    horizon: usize,
    seed: u64,
) -> Result<DefeatReport, AdversaryError> {
    if runs < MIN_DEFEAT_RUNS {
        return Err(AdversaryError::TooFewRuns(runs));
    }
    let k_max = partition.k_max();
    // per run, per level: (loss at τ_k, running average at τ_k)
    let per_run: Vec<Vec<Option<(f64, f64)>>> = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let target = sample_adversarial_target(partition.clone(), thresholds, loss, seeding::derive(seed, &[run]))?;
            let process = sampler.replica(run);
            let mut rule: Box<dyn OnlineLearner> = match challenger {
                Challenger::Rule(kind) => kind.build(loss, space),
                Challenger::Oracle => Box::new(OracleRule(target.clone())),
            };
            let out = run_online(rule.as_mut(), &process, &target, loss, horizon);
            let visits = first_visits(&partition, &out.xs)?;
            Ok(visits
                .iter()
                .map(|v| v.map(|t| (out.trajectory.per_round[t - 1], out.trajectory.average_at(t))))
                .collect())
        })
        .collect::<Result<_, AdversaryError>>()?;
    let rows = (0..=k_max)
        .map(|k| {
            let losses: Vec<f64> = per_run.iter().filter_map(|r| r[k].map(|v| v.0)).collect();
            let averages: Vec<f64> = per_run.iter().filter_map(|r| r[k].map(|v| v.1)).collect();
            DefeatRow {
                level: k,
                threshold: thresholds.threshold(k),
                visits: losses.len(),
                first_visit_loss: aggregate(&losses, Estimator::Mean).ok(),
                running_average: aggregate(&averages, Estimator::Mean).ok(),
            }
        })
        .collect();
    Ok(DefeatReport { challenger, runs, rows })
}

/// A decision procedure on prefixes: `true` claims finite support.
pub trait HypothesisTest: Sync {
    fn decide(&self, prefix: &[Point], rng: &mut dyn RngCore) -> bool;
    fn name(&self) -> &'static str;
}

/// Outputs 1 iff none of the last `⌈n/2⌉` values of `X_0..X_n` is new.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoveltyWindowTest;

impl HypothesisTest for NoveltyWindowTest {
    fn decide(&self, prefix: &[Point], _rng: &mut dyn RngCore) -> bool {
        let n = prefix.len().saturating_sub(1);
        let window_start = prefix.len() - n.div_ceil(2);
        let mut seen = HashSet::new();
        for (i, x) in prefix.iter().enumerate() {
            if seen.insert(x) && i >= window_start {
                return false;
            }
        }
        true
    }

    fn name(&self) -> &'static str {
        "novelty-window"
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConstantTest(pub bool);

impl HypothesisTest for ConstantTest {
    fn decide(&self, _prefix: &[Point], _rng: &mut dyn RngCore) -> bool {
        self.0
    }

    fn name(&self) -> &'static str {
        "constant"
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CoinFlipTest;

impl HypothesisTest for CoinFlipTest {
    fn decide(&self, _prefix: &[Point], rng: &mut dyn RngCore) -> bool {
        rng.next_u32() & 1 == 1
    }

    fn name(&self) -> &'static str {
        "coin-flip"
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Repeat `x_0`; the test should come to answer 1.
    Constant,
    /// Visit `x_t`; the test should come to answer 0.
    Distinct,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchRecord {
    pub k: usize,
    pub n: usize,
    pub mode: Mode,
    /// Fraction of replays answering 1 on `X_0..X_n`.
    pub frequency_one: f64,
    pub replays: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoolingTranscript {
    pub sequence: Vec<Point>,
    pub switches: Vec<SwitchRecord>,
}

impl FoolingTranscript {
    pub fn switch_indices(&self) -> Vec<usize> {
        self.switches.iter().map(|s| s.n).collect()
    }
}

/// The dyadic enumeration of the unit interval, `x_0 = 1/2`.
pub fn unit_distinct_points(i: usize) -> Point {
    MetricSpace::unit_interval().dense_point(i + 1)
}

/// Builds `X` mode by mode from `n_0 = 0`: odd `k` continues with fresh
/// points until the test answers 1 with probability below 1/4, even `k`
/// repeats `x_0` until it answers 1 with probability above 3/4. Each `n_k`
/// is certified by a 0.99 Clopper-Pearson bound over `replays` runs of the
/// test on the fixed prefix.
pub fn fool_hypothesis_test(
    test: &dyn HypothesisTest,
    distinct: &dyn Fn(usize) -> Point,
    switches: usize,
    replays: usize,
    cap: usize,
    seed: u64,
) -> Result<FoolingTranscript, AdversaryError> {
    if replays == 0 {
        return Err(AdversaryError::Invalid("replays must be positive".into()));
    }
    let mut sequence = vec![distinct(0)];
    let mut records = Vec::with_capacity(switches);
    let n_replays = replays as u64;
    for k in 1..=switches {
        let mode = if k % 2 == 1 { Mode::Distinct } else { Mode::Constant };
        let mut certified = None;
        while sequence.len() <= cap {
            let t = sequence.len();
            sequence.push(match mode {
                Mode::Constant => distinct(0),
                Mode::Distinct => distinct(t),
            });
            let ones: u64 = (0..n_replays)
                .into_par_iter()
                .map(|r| {
                    let mut rng = seeding::stream(seed, &[k as u64, t as u64, r]);
                    u64::from(test.decide(&sequence, &mut rng))
                })
                .sum();
            let ok = match mode {
                Mode::Constant => cp_lower(ones, n_replays, CONFIDENCE) > 0.75,
                Mode::Distinct => cp_upper(ones, n_replays, CONFIDENCE) < 0.25,
            };
            if ok {
                certified = Some(SwitchRecord { k, n: t, mode, frequency_one: ones as f64 / replays as f64, replays });
                break;
            }
        }
        records.push(certified.ok_or(AdversaryError::TestNonconvergent { switch: k, cap })?);
    }
    Ok(FoolingTranscript { sequence, switches: records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::PartitionSchedule;
    use crate::process::SamplerKind;

    fn s(x: f64) -> Point {
        Point::Scalar(x)
    }

    // B_1 = [0.1375, 0.2625] ∪ [0.5375, 0.6625], B_2 = [0.86875, 0.98125]
    fn two_levels() -> Arc<RandomPartition> {
        let sch = PartitionSchedule::from_deltas(&[0.125, 0.0625]).unwrap();
        Arc::new(RandomPartition::from_centers(&sch, vec![vec![0.2, 0.6], vec![0.9, 0.95]]).unwrap())
    }

    #[test]
    fn deterministic_first_visit() {
        let p = two_levels();
        let mut values = vec![s(0.4); 6];
        values.push(s(0.2));
        values.extend([s(0.4), s(0.93)]);
        let proc = ProcessSampler::new(SamplerKind::DeterministicList { values }, 0).unwrap();
        let th = estimate_first_visit_thresholds(&proc, &p, 50, 9).unwrap();
        assert_eq!(th.threshold(0), 1);
        assert_eq!(th.threshold(1), 7);
        assert_eq!(th.threshold(2), 9);
        assert!(th.levels.iter().all(|l| l.reachable));
    }

    #[test]
    fn unreachable_levels() {
        let p = two_levels();
        let values = vec![s(0.4), s(0.2)];
        let proc = ProcessSampler::new(SamplerKind::DeterministicList { values }, 0).unwrap();
        let th = estimate_first_visit_thresholds(&proc, &p, 10, 20).unwrap();
        assert!(!th.levels[2].reachable);
        assert_eq!(th.threshold(2), 0);
        let proc = ProcessSampler::new(SamplerKind::constant(0.4), 0).unwrap();
        assert!(matches!(
            estimate_first_visit_thresholds(&proc, &p, 10, 20),
            Err(AdversaryError::HorizonInsufficient { hit: 0, .. })
        ));
    }

    #[test]
    fn geometric_first_visit_quantile() {
        // B_1 = [0, 0.4] has measure 0.4 and B_2 = [0.9, 1] measure 0.1, so
        // τ_1 and τ_2 are geometric with those rates.
        let sch = PartitionSchedule::from_deltas(&[0.2, 0.1]).unwrap();
        let p = RandomPartition::from_centers(&sch, vec![vec![0.1, 0.3], vec![0.95, 0.95]]).unwrap();
        let proc = ProcessSampler::new(SamplerKind::IidUniform, 5).unwrap();
        let th = estimate_first_visit_thresholds(&proc, &p, 2000, 400).unwrap();
        // smallest t with 1 - 0.6^t >= 1/2 is 2; with 1 - 0.9^t >= 3/4 it is 14
        assert_eq!(th.threshold(1), 2);
        assert!((14..=15).contains(&th.threshold(2)), "{}", th.threshold(2));
        assert!(th.levels.iter().all(|l| l.certified));
    }

    #[test]
    fn target_pairs_and_cells() {
        let p = two_levels();
        let th = FirstVisitThresholds {
            levels: [1usize, 7, 0]
                .iter()
                .enumerate()
                .map(|(k, &t)| LevelThreshold {
                    level: k,
                    threshold: t,
                    reachable: t > 0,
                    certified: true,
                    visits: 1,
                    trials: 1,
                })
                .collect(),
        };
        let loss = LossModel::squared();
        let target = sample_adversarial_target(p.clone(), &th, &loss, 3).unwrap();
        assert_eq!(target.pairs()[1], (s(0.0), s(6.0)));
        assert!(loss.evaluate(&target.pairs()[1].0, &target.pairs()[1].1) >= 28.0);
        assert_eq!(target.pairs()[2], (s(0.0), s(0.0)));
        assert_eq!(target.value(&s(0.15)), target.value(&s(0.25)));
        assert_eq!(target.value(&s(0.0)), target.value(&s(0.75)));
        let zo = LossModel::zero_one(2).unwrap();
        assert!(matches!(sample_adversarial_target(p, &th, &zo, 3), Err(AdversaryError::Loss(_))));
    }

    #[test]
    fn target_is_cell_constant() {
        let sch = PartitionSchedule::dyadic(4, 3).unwrap();
        let p = Arc::new(RandomPartition::build_unit_interval(&sch, 8).unwrap());
        let th = FirstVisitThresholds {
            levels: (0..=4)
                .map(|k| LevelThreshold {
                    level: k,
                    threshold: k + 1,
                    reachable: true,
                    certified: true,
                    visits: 1,
                    trials: 1,
                })
                .collect(),
        };
        let target = sample_adversarial_target(p.clone(), &th, &LossModel::squared(), 1).unwrap();
        let mut rng = seeding::stream(2, &[]);
        let mut by_cell: std::collections::HashMap<usize, Value> = std::collections::HashMap::new();
        for _ in 0..1000 {
            let x = s(rng.random::<f64>());
            let k = cell_level(&p, &x).unwrap();
            let v = target.value(&x);
            assert_eq!(by_cell.entry(k).or_insert_with(|| v.clone()), &v);
        }
    }

    #[test]
    fn memorization_is_defeated_and_oracle_is_not() {
        let proc = ProcessSampler::new(SamplerKind::GeometricDecay { step: 0.125 }, 0).unwrap();
        let sch = PartitionSchedule::dyadic(3, 3).unwrap();
        let horizon = 400;
        let support = rollout_support(&proc, 1, horizon);
        let p = Arc::new(RandomPartition::build_unit_interval_on(&sch, &support, 6).unwrap());
        let th = estimate_first_visit_thresholds(&proc, &p, 20, horizon).unwrap();
        let loss = LossModel::squared();
        let space = MetricSpace::unit_interval();
        let report = evaluate_defeat(
            Challenger::Rule(RuleKind::Memorization),
            &proc,
            p.clone(),
            &th,
            &loss,
            &space,
            200,
            horizon,
            1,
        )
        .unwrap();
        for row in report.rows.iter().filter(|r| r.visits > 0) {
            let mean = row.first_visit_loss.unwrap().estimate;
            assert!(mean >= 0.9 * row.threshold as f64, "{row:?}");
            assert!(row.running_average.unwrap().estimate >= 0.9, "{row:?}");
        }
        let oracle =
            evaluate_defeat(Challenger::Oracle, &proc, p.clone(), &th, &loss, &space, 100, horizon, 1).unwrap();
        assert!(oracle.rows.iter().filter(|r| r.visits > 0).all(|r| r.first_visit_loss.unwrap().estimate == 0.0));
        assert_eq!(
            evaluate_defeat(Challenger::Oracle, &proc, p, &th, &loss, &space, 10, horizon, 1),
            Err(AdversaryError::TooFewRuns(10))
        );
    }

    #[test]
    fn novelty_test_is_fooled() {
        let t = fool_hypothesis_test(&NoveltyWindowTest, &unit_distinct_points, 6, 50, 10_000, 0).unwrap();
        assert_eq!(&t.switch_indices()[..4], &[1, 2, 3, 6]);
        assert!(t.switch_indices().windows(2).all(|w| w[0] < w[1]));
        for r in &t.switches {
            match r.mode {
                Mode::Constant => assert!(r.k % 2 == 0 && r.frequency_one > 0.75),
                Mode::Distinct => assert!(r.k % 2 == 1 && r.frequency_one < 0.25),
            }
        }
        assert_eq!(t.sequence.len(), t.switch_indices().last().unwrap() + 1);
    }

    #[test]
    fn non_converging_tests_are_reported() {
        assert_eq!(
            fool_hypothesis_test(&ConstantTest(true), &unit_distinct_points, 4, 50, 100, 0),
            Err(AdversaryError::TestNonconvergent { switch: 1, cap: 100 })
        );
        assert_eq!(
            fool_hypothesis_test(&CoinFlipTest, &unit_distinct_points, 4, 200, 100, 0),
            Err(AdversaryError::TestNonconvergent { switch: 1, cap: 100 })
        );
    }

    #[test]
    fn novelty_window_decisions() {
        let mut rng = seeding::stream(0, &[]);
        let pts = |v: &[f64]| v.iter().map(|&x| s(x)).collect::<Vec<_>>();
        assert!(NoveltyWindowTest.decide(&pts(&[0.5]), &mut rng));
        assert!(!NoveltyWindowTest.decide(&pts(&[0.5, 0.25]), &mut rng));
        assert!(NoveltyWindowTest.decide(&pts(&[0.5, 0.25, 0.5]), &mut rng));
        assert!(!NoveltyWindowTest.decide(&pts(&[0.5, 0.25, 0.5, 0.75, 0.5, 0.5]), &mut rng));
        assert!(NoveltyWindowTest.decide(&pts(&[0.5, 0.25, 0.5, 0.75, 0.5, 0.5, 0.5]), &mut rng));
    }
}
