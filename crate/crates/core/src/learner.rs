//! Online learning rules, label sources, and the online, inductive and
//! self-adaptive evaluation protocols.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::frechet::FrechetAccumulator;
use crate::loss::{LossModel, Value, ValueSpace};
use crate::metric_space::{MetricSpace, Point, SpaceKind};
use crate::process::ProcessSampler;
use crate::seeding;

pub trait OnlineLearner: Send {
    /// Pure: repeated calls without `observe` agree.
    fn predict(&self, x: &Point) -> Value;
    fn observe(&mut self, x: &Point, y: &Value);
    /// An instance without its label; ignored unless the rule can use it.
    fn observe_unlabeled(&mut self, _x: &Point) {}
    fn name(&self) -> &'static str;
}

/// Recalls the first label stored for an exactly matching instance.
#[derive(Clone, Debug)]
pub struct Memorization {
    table: HashMap<Point, Value>,
    default: Value,
}

impl Memorization {
    pub fn new(default: Value) -> Self {
        Memorization { table: HashMap::new(), default }
    }

    pub fn stored(&self) -> usize {
        self.table.len()
    }
}

impl OnlineLearner for Memorization {
    fn predict(&self, x: &Point) -> Value {
        self.table.get(x).unwrap_or(&self.default).clone()
    }

    fn observe(&mut self, x: &Point, y: &Value) {
        self.table.entry(x.clone()).or_insert_with(|| y.clone());
    }

    fn name(&self) -> &'static str {
        "memorization"
    }
}

/// Keeps every label per instance and predicts their Fréchet mean.
#[derive(Clone, Debug)]
pub struct FrechetMemorizer {
    table: HashMap<Point, FrechetAccumulator>,
    space: ValueSpace,
    power: f64,
    default: Value,
}

impl FrechetMemorizer {
    pub fn new(loss: &LossModel) -> Self {
        FrechetMemorizer {
            table: HashMap::new(),
            space: loss.value_space(),
            power: loss.exponent(),
            default: loss.default_value(),
        }
    }

    pub fn labels_at(&self, x: &Point) -> usize {
        self.table.get(x).map_or(0, |a| a.len())
    }
}

impl OnlineLearner for FrechetMemorizer {
    fn predict(&self, x: &Point) -> Value {
        self.table.get(x).and_then(|a| a.minimizer()).unwrap_or_else(|| self.default.clone())
    }

    fn observe(&mut self, x: &Point, y: &Value) {
        let (space, power) = (self.space, self.power);
        self.table.entry(x.clone()).or_insert_with(|| FrechetAccumulator::new(space, power)).push(y);
    }

    fn name(&self) -> &'static str {
        "frechet-memorizer"
    }
}

/// One-nearest-neighbor over the distinct instances seen so far; distance
/// ties go to the earliest stored instance.
#[derive(Clone, Debug)]
pub struct NearestNeighbor {
    space: MetricSpace,
    // instance -> (insertion order, first label)
    stored: BTreeMap<Point, (usize, Value)>,
    default: Value,
}

impl NearestNeighbor {
    pub fn new(space: MetricSpace, default: Value) -> Self {
        NearestNeighbor { space, stored: BTreeMap::new(), default }
    }

    fn on_line(&self) -> bool {
        matches!(self.space.kind(), SpaceKind::UnitInterval | SpaceKind::RealLine)
    }
}

impl OnlineLearner for NearestNeighbor {
    fn predict(&self, x: &Point) -> Value {
        let candidates: Vec<(&Point, &(usize, Value))> = if self.on_line() {
            self.stored
                .range(..=x.clone())
                .next_back()
                .into_iter()
                .chain(self.stored.range(x.clone()..).next())
                .collect()
        } else {
            self.stored.iter().collect()
        };
        candidates
            .into_iter()
            .map(|(p, (order, y))| (self.space.distance(p, x), *order, y))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map_or_else(|| self.default.clone(), |(_, _, y)| y.clone())
    }

    fn observe(&mut self, x: &Point, y: &Value) {
        let order = self.stored.len();
        self.stored.entry(x.clone()).or_insert_with(|| (order, y.clone()));
    }

    fn name(&self) -> &'static str {
        "nearest-neighbor"
    }
}

/// Always answers the default value.
#[derive(Clone, Debug)]
pub struct ConstantDefault {
    default: Value,
}

impl ConstantDefault {
    pub fn new(default: Value) -> Self {
        ConstantDefault { default }
    }
}

impl OnlineLearner for ConstantDefault {
    fn predict(&self, _x: &Point) -> Value {
        self.default.clone()
    }

    fn observe(&mut self, _x: &Point, _y: &Value) {}

    fn name(&self) -> &'static str {
        "constant-default"
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Memorization,
    FrechetMemorizer,
    NearestNeighbor,
    ConstantDefault,
}

impl RuleKind {
    pub const ALL: [RuleKind; 4] =
        [RuleKind::Memorization, RuleKind::FrechetMemorizer, RuleKind::NearestNeighbor, RuleKind::ConstantDefault];

    pub fn as_str(&self) -> &'static str {
        match self {
            RuleKind::Memorization => "memorization",
            RuleKind::FrechetMemorizer => "frechet-memorizer",
            RuleKind::NearestNeighbor => "nearest-neighbor",
            RuleKind::ConstantDefault => "constant-default",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }

    pub fn build(&self, loss: &LossModel, space: &MetricSpace) -> Box<dyn OnlineLearner> {
        let y0 = loss.default_value();
        match self {
            RuleKind::Memorization => Box::new(Memorization::new(y0)),
            RuleKind::FrechetMemorizer => Box::new(FrechetMemorizer::new(loss)),
            RuleKind::NearestNeighbor => Box::new(NearestNeighbor::new(space.clone(), y0)),
            RuleKind::ConstantDefault => Box::new(ConstantDefault::new(y0)),
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Produces `Y_t` given `X_t`; deterministic sources ignore the generator.
pub trait LabelSource: Sync {
    fn label(&self, x: &Point, rng: &mut dyn RngCore) -> Value;
}

/// A fixed measurable map, used as the reference for excess loss.
pub trait Predictor: Sync {
    fn value(&self, x: &Point) -> Value;
}

pub type TargetFn = Arc<dyn Fn(&Point) -> Value + Send + Sync>;

#[derive(Clone)]
pub enum Target {
    Constant(Value),
    /// Exact-match table with a fallback for unlisted instances.
    Lookup {
        table: HashMap<Point, Value>,
        fallback: Value,
    },
    /// `slope * x + intercept` on scalar instances.
    Affine {
        slope: f64,
        intercept: f64,
    },
    Function(TargetFn),
    /// `mean(x) + sigma(x) * N(0, 1)`; as a predictor it returns `mean(x)`,
    /// the Bayes predictor under squared loss.
    GaussianNoise {
        mean: Box<Target>,
        sigma: Box<Target>,
    },
}

impl Target {
    pub fn lookup(pairs: &[(f64, f64)], fallback: f64) -> Self {
        Target::Lookup {
            table: pairs.iter().map(|&(x, y)| (Point::Scalar(x), Point::Scalar(y))).collect(),
            fallback: Point::Scalar(fallback),
        }
    }

    pub fn function(f: impl Fn(&Point) -> Value + Send + Sync + 'static) -> Self {
        Target::Function(Arc::new(f))
    }
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Constant(v) => write!(f, "Constant({v:?})"),
            Target::Lookup { table, fallback } => write!(f, "Lookup({} entries, fallback {fallback:?})", table.len()),
            Target::Affine { slope, intercept } => write!(f, "Affine({slope} x + {intercept})"),
            Target::Function(_) => f.write_str("Function"),
            Target::GaussianNoise { mean, sigma } => write!(f, "GaussianNoise({mean:?}, {sigma:?})"),
        }
    }
}

impl Predictor for Target {
    fn value(&self, x: &Point) -> Value {
        match self {
            Target::Constant(v) => v.clone(),
            Target::Lookup { table, fallback } => table.get(x).unwrap_or(fallback).clone(),
            Target::Affine { slope, intercept } => {
                Point::Scalar(slope * x.scalar().expect("affine target needs scalar instances") + intercept)
            }
            Target::Function(f) => f(x),
            Target::GaussianNoise { mean, .. } => mean.value(x),
        }
    }
}

impl LabelSource for Target {
    fn label(&self, x: &Point, rng: &mut dyn RngCore) -> Value {
        match self {
            Target::GaussianNoise { mean, sigma } => {
                let m = mean.value(x).scalar().expect("scalar mean");
                let s = sigma.value(x).scalar().expect("scalar sigma");
                let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
                Point::Scalar(m + s * z)
            }
            other => other.value(x),
        }
    }
}

/// Powers of two up to the horizon, then the horizon itself.
pub fn default_checkpoints(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> =
        std::iter::successors(Some(1usize), |c| c.checked_mul(2)).take_while(|&c| c <= horizon).collect();
    if out.last() != Some(&horizon) && horizon > 0 {
        out.push(horizon);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossTrajectory {
    pub per_round: Vec<f64>,
    /// `running_average[T - 1] = (1/T) Σ_{t<=T} per_round[t - 1]`.
    pub running_average: Vec<f64>,
    pub checkpoints: Vec<usize>,
}

impl LossTrajectory {
    pub fn from_losses(per_round: Vec<f64>) -> Self {
        let mut prefix = 0.0;
        let running_average = per_round
            .iter()
            .enumerate()
            .map(|(i, l)| {
                prefix += l;
                prefix / (i + 1) as f64
            })
            .collect();
        let checkpoints = default_checkpoints(per_round.len());
        LossTrajectory { per_round, running_average, checkpoints }
    }

    pub fn horizon(&self) -> usize {
        self.per_round.len()
    }

    /// Average over the first `t` rounds (1-based).
    pub fn average_at(&self, t: usize) -> f64 {
        self.running_average[t - 1]
    }

    pub fn final_average(&self) -> f64 {
        self.running_average.last().copied().unwrap_or(0.0)
    }

    pub fn nonzero_rounds(&self) -> usize {
        self.per_round.iter().filter(|&&l| l != 0.0).count()
    }

    pub fn checkpoint_averages(&self) -> Vec<(usize, f64)> {
        self.checkpoints.iter().map(|&t| (t, self.average_at(t))).collect()
    }
}

#[derive(Clone, Debug)]
pub struct OnlineOutcome {
    pub trajectory: LossTrajectory,
    pub xs: Vec<Point>,
    pub ys: Vec<Value>,
    pub predictions: Vec<Value>,
}

/// Generator for labels; separate from the instance stream so that the same
/// realization of `X` is seen under every rule.
pub fn label_stream(sampler: &ProcessSampler) -> seeding::Stream {
    seeding::stream(sampler.seed(), &[seeding::tag("labels")])
}

/// Predict, incur the loss, then reveal the label, for `horizon` rounds.
pub fn run_online(
    rule: &mut dyn OnlineLearner,
    sampler: &ProcessSampler,
    target: &dyn LabelSource,
    loss: &LossModel,
    horizon: usize,
) -> OnlineOutcome {
    let mut rng = label_stream(sampler);
    let mut xs = Vec::with_capacity(horizon);
    let mut ys = Vec::with_capacity(horizon);
    let mut predictions = Vec::with_capacity(horizon);
    let mut losses = Vec::with_capacity(horizon);
    for x in sampler.stream().take(horizon) {
        let y_hat = rule.predict(&x);
        let y = target.label(&x, &mut rng);
        losses.push(loss.evaluate(&y_hat, &y));
        rule.observe(&x, &y);
        xs.push(x);
        ys.push(y);
        predictions.push(y_hat);
    }
    OnlineOutcome { trajectory: LossTrajectory::from_losses(losses), xs, ys, predictions }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Average loss over the evaluation window.
    pub average: f64,
    pub per_round: Vec<f64>,
}

impl Evaluation {
    fn from_losses(per_round: Vec<f64>) -> Self {
        let average = per_round.iter().sum::<f64>() / per_round.len().max(1) as f64;
        Evaluation { average, per_round }
    }
}

/// Train on rounds `1..t`, freeze, and evaluate on rounds `t..t+window`.
pub fn run_inductive(
    rule: &mut dyn OnlineLearner,
    sampler: &ProcessSampler,
    target: &dyn LabelSource,
    loss: &LossModel,
    train_horizon: usize,
    window: usize,
) -> Evaluation {
    run_frozen(rule, sampler, target, loss, train_horizon, window, false)
}

/// Labels stop at round `t1`; evaluation rounds still reveal their instances
/// through `observe_unlabeled`.
pub fn run_self_adaptive(
    rule: &mut dyn OnlineLearner,
    sampler: &ProcessSampler,
    target: &dyn LabelSource,
    loss: &LossModel,
    label_horizon: usize,
    window: usize,
) -> Evaluation {
    run_frozen(rule, sampler, target, loss, label_horizon, window, true)
}

fn run_frozen(
    rule: &mut dyn OnlineLearner,
    sampler: &ProcessSampler,
    target: &dyn LabelSource,
    loss: &LossModel,
    t: usize,
    window: usize,
    stream_unlabeled: bool,
) -> Evaluation {
    assert!(t >= 1 && window >= 1, "t and the window must be positive");
    let mut rng = label_stream(sampler);
    let mut points = sampler.stream();
    for x in points.by_ref().take(t - 1) {
        let y = target.label(&x, &mut rng);
        rule.observe(&x, &y);
    }
    let mut losses = Vec::with_capacity(window);
    for x in points.take(window) {
        let y = target.label(&x, &mut rng);
        losses.push(loss.evaluate(&rule.predict(&x), &y));
        if stream_unlabeled {
            rule.observe_unlabeled(&x);
        }
    }
    Evaluation::from_losses(losses)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcessCurve {
    /// Running `(1/T) Σ (loss(ŷ_t, Y_t) - loss(f̄(X_t), Y_t))`.
    pub running: Vec<f64>,
    pub checkpoints: Vec<(usize, f64)>,
}

impl ExcessCurve {
    pub fn final_excess(&self) -> f64 {
        self.running.last().copied().unwrap_or(0.0)
    }
}

pub fn excess_loss(outcome: &OnlineOutcome, reference: &dyn Predictor, loss: &LossModel) -> ExcessCurve {
    let mut prefix = 0.0;
    let running: Vec<f64> = outcome
        .trajectory
        .per_round
        .iter()
        .zip(outcome.xs.iter().zip(&outcome.ys))
        .enumerate()
        .map(|(i, (l, (x, y)))| {
            prefix += l - loss.evaluate(&reference.value(x), y);
            prefix / (i + 1) as f64
        })
        .collect();
    let checkpoints = outcome.trajectory.checkpoints.iter().map(|&t| (t, running[t - 1])).collect();
    ExcessCurve { running, checkpoints }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::SamplerKind;
    use proptest::prelude::*;

    fn s(x: f64) -> Point {
        Point::Scalar(x)
    }

    fn sampler(kind: SamplerKind, seed: u64) -> ProcessSampler {
        ProcessSampler::new(kind, seed).unwrap()
    }

    #[test]
    fn memorization_recall_and_default() {
        let mut m = Memorization::new(s(0.0));
        assert_eq!(m.predict(&s(0.7)), s(0.0));
        m.observe(&s(0.3), &s(5.0));
        assert_eq!(m.predict(&s(0.3)), s(5.0));
        m.observe(&s(0.3), &s(9.0));
        assert_eq!(m.predict(&s(0.3)), s(5.0));
        assert_eq!(m.predict(&s(0.3)), m.predict(&s(0.3)));
    }

    #[test]
    fn frechet_memorizer_examples() {
        let mut f = FrechetMemorizer::new(&LossModel::squared());
        for y in [0.0, 1.0, 2.0] {
            f.observe(&s(0.3), &s(y));
        }
        assert_eq!(f.predict(&s(0.3)), s(1.0));
        assert_eq!(f.predict(&s(0.4)), s(0.0));
        assert_eq!(f.labels_at(&s(0.3)), 3);

        let mut f = FrechetMemorizer::new(&LossModel::absolute());
        f.observe(&s(0.3), &s(5.0));
        f.observe(&s(0.3), &s(9.0));
        assert_eq!(f.predict(&s(0.3)), s(5.0));
    }

    #[test]
    fn nearest_neighbor_tie_goes_to_earliest() {
        let mut nn = NearestNeighbor::new(MetricSpace::unit_interval(), s(0.0));
        nn.observe(&s(0.2), &s(1.0));
        nn.observe(&s(0.8), &s(2.0));
        assert_eq!(nn.predict(&s(0.5)), s(1.0));
        assert_eq!(nn.predict(&s(0.7)), s(2.0));
        let mut nn = NearestNeighbor::new(MetricSpace::unit_interval(), s(0.0));
        nn.observe(&s(0.75), &s(2.0));
        nn.observe(&s(0.25), &s(1.0));
        assert_eq!(nn.predict(&s(0.5)), s(2.0));
    }

    #[test]
    fn nearest_neighbor_scan_matches_sorted_lookup() {
        let space = MetricSpace::new(SpaceKind::UnitBox { dim: 1 }).unwrap();
        let mut rng = seeding::stream(1, &[]);
        let mut sorted = NearestNeighbor::new(MetricSpace::unit_interval(), s(0.0));
        let mut scan = NearestNeighbor::new(space, Point::Vector(vec![0.0]));
        for i in 0..200 {
            let x = (rand::RngCore::next_u32(&mut rng) % 64) as f64 / 64.0;
            sorted.observe(&s(x), &s(i as f64));
            scan.observe(&Point::Vector(vec![x]), &s(i as f64));
        }
        for j in 0..=128 {
            let q = j as f64 / 128.0;
            assert_eq!(sorted.predict(&s(q)), scan.predict(&Point::Vector(vec![q])), "query {q}");
        }
    }

    #[test]
    fn constant_process_costs_one_miss() {
        let loss = LossModel::squared();
        let mut rule = Memorization::new(loss.default_value());
        let out = run_online(&mut rule, &sampler(SamplerKind::constant(0.4), 0), &Target::Constant(s(3.0)), &loss, 64);
        for t in 1..=64 {
            assert_eq!(out.trajectory.average_at(t), 9.0 / t as f64);
        }
        assert_eq!(out.trajectory.checkpoints, vec![1, 2, 4, 8, 16, 32, 64]);
    }

    #[test]
    fn geometric_decay_always_misses() {
        let loss = LossModel::squared();
        let mut rule = Memorization::new(loss.default_value());
        let proc = sampler(SamplerKind::GeometricDecay { step: 1.0 }, 0);
        let out = run_online(&mut rule, &proc, &Target::Constant(s(1.0)), &loss, 500);
        assert!(out.trajectory.running_average.iter().all(|&a| a == 1.0));
        assert_eq!(out.trajectory.checkpoints.last(), Some(&500));
    }

    #[test]
    fn trajectory_prefix_sums() {
        let t = LossTrajectory::from_losses(vec![1.0, 0.0, 2.0, 0.5]);
        assert_eq!(t.running_average, vec![1.0, 0.5, 1.0, 0.875]);
        assert_eq!(t.checkpoints, vec![1, 2, 4]);
        assert_eq!(t.nonzero_rounds(), 3);
    }

    #[test]
    fn inductive_examples() {
        let loss = LossModel::squared();
        let target = Target::lookup(&[(0.25, 2.0), (0.5, 3.0)], 0.0);
        let proc = sampler(SamplerKind::finite_support(vec![0.25, 0.5]), 4);
        let last_novel = {
            let pts = proc.rollout(200).points;
            let mut seen = std::collections::HashSet::new();
            pts.iter().enumerate().filter(|(_, p)| seen.insert((*p).clone())).map(|(i, _)| i + 1).last().unwrap()
        };
        let mut rule = Memorization::new(loss.default_value());
        assert_eq!(run_inductive(&mut rule, &proc, &target, &loss, last_novel + 1, 100).average, 0.0);

        let mut rule = NearestNeighbor::new(MetricSpace::unit_interval(), loss.default_value());
        assert_eq!(run_inductive(&mut rule, &proc, &target, &loss, last_novel + 1, 100).average, 0.0);

        let mut rule = Memorization::new(loss.default_value());
        let constant = sampler(SamplerKind::constant(0.25), 0);
        assert_eq!(run_inductive(&mut rule, &constant, &target, &loss, 1, 10).average, 4.0);
    }

    #[test]
    fn self_adaptive_examples() {
        let loss = LossModel::squared();
        let target = Target::lookup(&[(0.25, 2.0), (0.5, 3.0)], 0.0);
        let proc = sampler(SamplerKind::finite_support(vec![0.25, 0.5]), 9);
        let mut rule = Memorization::new(loss.default_value());
        assert_eq!(run_self_adaptive(&mut rule, &proc, &target, &loss, 150, 50).average, 0.0);

        // With no labels every evaluation round answers the default.
        let mut a = Memorization::new(loss.default_value());
        let mut b = Memorization::new(loss.default_value());
        let sa = run_self_adaptive(&mut a, &proc, &target, &loss, 1, 40);
        let ind = run_inductive(&mut b, &proc, &target, &loss, 1, 40);
        assert_eq!(sa, ind);
        assert_eq!(sa.per_round.iter().filter(|&&l| l != 0.0).count(), 40);

        let mut c = ConstantDefault::new(loss.default_value());
        let ev = run_self_adaptive(&mut c, &proc, &target, &loss, 5, 64);
        let xs = proc.rollout(68).points;
        let manual = xs[4..68].iter().map(|x| loss.evaluate(&s(0.0), &target.value(x))).sum::<f64>() / 64.0;
        assert_eq!(ev.average, manual);
    }

    #[test]
    fn excess_examples() {
        let loss = LossModel::squared();
        let target = Target::lookup(&[(0.1, 1.0), (0.2, -2.0), (0.3, 4.0)], 0.0);
        let proc = sampler(SamplerKind::finite_support(vec![0.1, 0.2, 0.3]), 2);

        let mut c = ConstantDefault::new(s(0.0));
        let out = run_online(&mut c, &proc, &target, &loss, 100);
        assert!(excess_loss(&out, &Target::Constant(s(0.0)), &loss).running.iter().all(|&e| e == 0.0));

        let mut m = Memorization::new(s(0.0));
        let out = run_online(&mut m, &proc, &target, &loss, 1000);
        let curve = excess_loss(&out, &Target::Constant(s(0.0)), &loss);
        assert!(curve.final_excess() <= 0.0);
        assert_eq!(curve.checkpoints.last().unwrap().0, 1000);
    }

    #[test]
    fn gaussian_noise_predictor_is_the_mean() {
        let t = Target::GaussianNoise {
            mean: Box::new(Target::lookup(&[(0.5, 3.0)], 0.0)),
            sigma: Box::new(Target::Constant(s(0.5))),
        };
        assert_eq!(t.value(&s(0.5)), s(3.0));
        let mut rng = seeding::stream(3, &[]);
        let n = 20_000;
        let mean = (0..n).map(|_| t.label(&s(0.5), &mut rng).scalar().unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 3.0).abs() < 0.02);
    }

    #[test]
    fn rule_kinds_round_trip() {
        for k in RuleKind::ALL {
            assert_eq!(RuleKind::parse(k.as_str()), Some(k));
            assert_eq!(k.build(&LossModel::squared(), &MetricSpace::unit_interval()).name(), k.as_str());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn memorization_errs_at_most_once_per_value(
            support in prop::collection::hash_set(0u32..1000, 1..12),
            seed in any::<u64>(),
            horizon in 1usize..3000,
        ) {
            let support: Vec<f64> = support.into_iter().map(|v| v as f64 / 1000.0).collect();
            let m = support.len();
            let loss = LossModel::squared();
            let target = Target::Affine { slope: 7.0, intercept: 1.0 };
            let mut rule = Memorization::new(loss.default_value());
            let out = run_online(&mut rule, &sampler(SamplerKind::finite_support(support), seed), &target, &loss, horizon);
            prop_assert!(out.trajectory.nonzero_rounds() <= m);
            prop_assert_eq!(out.trajectory.per_round.len(), horizon);
        }
    }
}
