//! Config-driven experiments: one TOML file per experiment, a fixed CSV
//! schema per experiment kind, and pass/fail verdicts.
//!
//! Every random draw derives from the master seed, the experiment kind and
//! the trial index, and trials are reduced in index order, so an identical
//! config and seed reproduce the CSV byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    estimate_first_visit_thresholds, evaluate_defeat, fool_hypothesis_test, rollout_support, unit_distinct_points,
    AdversaryError, Challenger, CoinFlipTest, ConstantTest, HypothesisTest, Mode, NoveltyWindowTest,
};
use crate::frechet::{check_convergence, FiniteLaw, FrechetError};
use crate::learner::{excess_loss, run_online, LabelSource, Predictor, RuleKind, Target};
use crate::loss::{LossError, LossModel, ValueSpace};
use crate::metric_space::{MetricSpace, Point};
use crate::partition::{
    estimate_schedule, fmv_hit_frequencies, mc_check_lemma1, mc_check_tail, PartitionError, PartitionSchedule,
    RandomPartition,
};
use crate::process::{ProcessError, ProcessSampler, SamplerKind};
use crate::seeding;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config-invalid: {0}")]
    ConfigInvalid(String),
    #[error("process: {0}")]
    Process(#[from] ProcessError),
    #[error("loss: {0}")]
    Loss(#[from] LossError),
    #[error("partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("adversary: {0}")]
    Adversary(#[from] AdversaryError),
    #[error("frechet: {0}")]
    Frechet(#[from] FrechetError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::ConfigInvalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Consistency,
    PartitionFmv,
    Lemma1,
    Lemma2Tail,
    Adversary,
    FoolTest,
    FrechetConvergence,
    BayesExcess,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Consistency,
        ExperimentKind::PartitionFmv,
        ExperimentKind::Lemma1,
        ExperimentKind::Lemma2Tail,
        ExperimentKind::Adversary,
        ExperimentKind::FoolTest,
        ExperimentKind::FrechetConvergence,
        ExperimentKind::BayesExcess,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::PartitionFmv => "partition-fmv",
            ExperimentKind::Lemma1 => "lemma1",
            ExperimentKind::Lemma2Tail => "lemma2-tail",
            ExperimentKind::Adversary => "adversary",
            ExperimentKind::FoolTest => "fool-test",
            ExperimentKind::FrechetConvergence => "frechet-convergence",
            ExperimentKind::BayesExcess => "bayes-excess",
        }
    }

    /// Column order of the result CSV.
    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Consistency => {
                &["run", "support_size", "nonzero_rounds", "max_default_loss", "final_average", "average_bound", "pass"]
            }
            ExperimentKind::PartitionFmv => {
                &["level", "horizon", "delta", "trials", "hits", "frequency", "lower", "bound", "required", "pass"]
            }
            ExperimentKind::Lemma1 => {
                &["level", "delta", "set_size", "trials", "misses", "frequency", "upper", "bound", "margin", "pass"]
            }
            ExperimentKind::Lemma2Tail => &["point", "level", "trials", "hits", "frequency", "upper", "bound", "pass"],
            ExperimentKind::Adversary => &[
                "level",
                "threshold",
                "reachable",
                "certified",
                "visits",
                "mean_first_visit_loss",
                "loss_lower",
                "mean_running_average",
                "running_lower",
                "pass",
            ],
            ExperimentKind::FoolTest => &["k", "n", "mode", "replays", "frequency_one", "pass"],
            ExperimentKind::FrechetConvergence => {
                &["n", "trials", "population_risk", "mean_gap", "gap_upper", "tolerance", "pass"]
            }
            ExperimentKind::BayesExcess => &["run", "final_excess", "tolerance", "pass"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Runs, redraws or trials, depending on the kind.
    pub trials: Option<usize>,
    pub horizon: Option<usize>,
    /// CSV destination; a `.meta` sidecar is written next to it.
    pub output: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerConfig {
    FiniteSupport {
        support: Vec<f64>,
        weights: Option<Vec<f64>>,
    },
    IidUniform,
    GeometricDecay {
        step: Option<f64>,
    },
    List {
        values: Vec<f64>,
    },
    Alternating {
        anchor: f64,
    },
    /// Finite support with probability `1 - p_infinite`, otherwise iid
    /// uniform (or geometric decay when `infinite_step` is set).
    Mixed {
        p_infinite: f64,
        support: Vec<f64>,
        weights: Option<Vec<f64>>,
        infinite_step: Option<f64>,
    },
}

impl SamplerConfig {
    pub fn kind(&self) -> SamplerKind {
        let finite = |support: &[f64], weights: &Option<Vec<f64>>| SamplerKind::FiniteSupportIid {
            support: support.iter().map(|&x| Point::Scalar(x)).collect(),
            weights: weights.clone().unwrap_or_else(|| vec![1.0; support.len()]),
        };
        match self {
            SamplerConfig::FiniteSupport { support, weights } => finite(support, weights),
            SamplerConfig::IidUniform => SamplerKind::IidUniform,
            SamplerConfig::GeometricDecay { step } => SamplerKind::GeometricDecay { step: step.unwrap_or(1.0) },
            SamplerConfig::List { values } => {
                SamplerKind::DeterministicList { values: values.iter().map(|&x| Point::Scalar(x)).collect() }
            }
            SamplerConfig::Alternating { anchor } => SamplerKind::AlternatingAdversarial { anchor: *anchor },
            SamplerConfig::Mixed { p_infinite, support, weights, infinite_step } => SamplerKind::Mixed {
                p_infinite: *p_infinite,
                finite: Box::new(finite(support, weights)),
                infinite: Box::new(match infinite_step {
                    Some(step) => SamplerKind::GeometricDecay { step: *step },
                    None => SamplerKind::IidUniform,
                }),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    Constant {
        value: f64,
    },
    Affine {
        slope: f64,
        intercept: f64,
    },
    Lookup {
        points: Vec<f64>,
        values: Vec<f64>,
        fallback: Option<f64>,
    },
    /// Gaussian labels with per-point means and standard deviations.
    GaussianLookup {
        points: Vec<f64>,
        means: Vec<f64>,
        sigmas: Vec<f64>,
    },
}

impl TargetConfig {
    fn build(&self) -> Result<Target, HarnessError> {
        let table = |points: &[f64], values: &[f64], what: &str| {
            if points.len() != values.len() {
                return Err(invalid(format!("target {what} and points differ in length")));
            }
            Ok(points.iter().copied().zip(values.iter().copied()).collect::<Vec<_>>())
        };
        Ok(match self {
            TargetConfig::Constant { value } => Target::Constant(Point::Scalar(*value)),
            TargetConfig::Affine { slope, intercept } => Target::Affine { slope: *slope, intercept: *intercept },
            TargetConfig::Lookup { points, values, fallback } => {
                Target::lookup(&table(points, values, "values")?, fallback.unwrap_or(0.0))
            }
            TargetConfig::GaussianLookup { points, means, sigmas } => {
                if sigmas.iter().any(|s| !(*s >= 0.0)) {
                    return Err(invalid("sigmas must be nonnegative"));
                }
                Target::GaussianNoise {
                    mean: Box::new(Target::lookup(&table(points, means, "means")?, 0.0)),
                    sigma: Box::new(Target::lookup(&table(points, sigmas, "sigmas")?, 0.0)),
                }
            }
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub k_max: Option<usize>,
    /// Explicit `δ_k`; estimated from the sampler when absent.
    pub deltas: Option<Vec<f64>>,
    pub horizons: Option<Vec<usize>>,
    /// Rollouts used for estimation.
    pub trials: Option<usize>,
    pub max_horizon: Option<usize>,
    /// Seed of the partition realization itself.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub level: Option<usize>,
    pub set: Option<Vec<f64>>,
    pub set_size: Option<usize>,
    pub points: Option<Vec<f64>>,
    pub margin: Option<f64>,
    pub tolerance: Option<f64>,
    pub required_fraction: Option<f64>,
    pub threshold_trials: Option<usize>,
    pub factor: Option<f64>,
    pub test: Option<String>,
    pub switches: Option<usize>,
    pub cap: Option<usize>,
    pub law_values: Option<Vec<f64>>,
    pub law_weights: Option<Vec<f64>>,
    pub sample_sizes: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub sampler: Option<SamplerConfig>,
    pub rule: Option<RuleConfig>,
    pub loss: Option<LossConfig>,
    pub target: Option<TargetConfig>,
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub params: Params,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind
    }

    /// Desk-scale defaults for each kind.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            experiment: ExperimentSection { kind, seed: 2024, trials: None, horizon: None, output: None },
            sampler: None,
            rule: None,
            loss: None,
            target: None,
            schedule: None,
            params: Params::default(),
        };
        match kind {
            ExperimentKind::Consistency => {
                c.experiment.trials = Some(100);
                c.experiment.horizon = Some(100_000);
                c.sampler =
                    Some(SamplerConfig::FiniteSupport { support: vec![0.1, 0.2, 0.3, 0.4, 0.5], weights: None });
                c.rule = Some(RuleConfig { kind: "memorization".into() });
                c.loss = Some(LossConfig { power: 2.0 });
                c.target = Some(TargetConfig::Affine { slope: 10.0, intercept: 1.0 });
            }
            ExperimentKind::PartitionFmv => {
                c.experiment.trials = Some(2000);
                c.sampler = Some(SamplerConfig::IidUniform);
                c.schedule = Some(ScheduleConfig {
                    k_max: Some(5),
                    trials: Some(1000),
                    max_horizon: Some(1_000_000),
                    ..Default::default()
                });
                c.params.margin = Some(0.03);
            }
            ExperimentKind::Lemma1 => {
                c.experiment.trials = Some(10_000);
                c.schedule = Some(ScheduleConfig { deltas: Some(vec![0.5f64.powi(10)]), ..Default::default() });
                c.params.level = Some(1);
                c.params.set_size = Some(17);
                c.params.margin = Some(0.012);
            }
            ExperimentKind::Lemma2Tail => {
                c.experiment.trials = Some(10_000);
                c.schedule = Some(ScheduleConfig {
                    deltas: Some((1..=6).map(|k| 0.5f64.powi(k + 4)).collect()),
                    ..Default::default()
                });
                c.params.points = Some(vec![0.1, 0.3, 0.5, 0.7, 0.9]);
            }
            ExperimentKind::Adversary => {
                c.experiment.trials = Some(500);
                c.experiment.horizon = Some(8192);
                c.sampler = Some(SamplerConfig::GeometricDecay { step: Some(0.125) });
                c.rule = Some(RuleConfig { kind: "memorization".into() });
                c.loss = Some(LossConfig { power: 2.0 });
                c.schedule = Some(ScheduleConfig {
                    k_max: Some(5),
                    trials: Some(1000),
                    max_horizon: Some(100_000),
                    ..Default::default()
                });
                c.params.threshold_trials = Some(1000);
                c.params.factor = Some(0.9);
            }
            ExperimentKind::FoolTest => {
                c.experiment.trials = Some(200);
                c.params.test = Some("novelty-window".into());
                c.params.switches = Some(4);
                c.params.cap = Some(100_000);
            }
            ExperimentKind::FrechetConvergence => {
                c.experiment.trials = Some(100);
                c.loss = Some(LossConfig { power: 2.0 });
                c.params.law_values = Some(vec![0.0, 1.0, 2.0]);
                c.params.sample_sizes = Some(vec![100, 1000, 10_000]);
                c.params.tolerance = Some(0.05);
            }
            ExperimentKind::BayesExcess => {
                let support = vec![0.1, 0.2, 0.3, 0.4, 0.5];
                c.experiment.trials = Some(100);
                c.experiment.horizon = Some(100_000);
                c.sampler = Some(SamplerConfig::FiniteSupport { support: support.clone(), weights: None });
                c.rule = Some(RuleConfig { kind: "frechet-memorizer".into() });
                c.loss = Some(LossConfig { power: 2.0 });
                c.target = Some(TargetConfig::GaussianLookup {
                    points: support,
                    means: vec![-2.0, 0.5, 1.0, 3.0, 7.5],
                    sigmas: vec![0.5, 1.0, 1.5, 2.0, 1.0],
                });
                c.params.tolerance = Some(0.05);
                c.params.required_fraction = Some(0.95);
            }
        }
        c
    }

    /// Checks every field the kind reads, before any computation.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let kind = self.kind();
        let need = |present: bool, what: &str| {
            if present {
                Ok(())
            } else {
                Err(invalid(format!("{} needs {what}", kind.as_str())))
            }
        };
        if self.experiment.trials == Some(0) || self.experiment.horizon == Some(0) {
            return Err(invalid("trials and horizon must be positive"));
        }
        if let Some(s) = &self.sampler {
            ProcessSampler::new(s.kind(), 0)?;
        }
        if let Some(r) = &self.rule {
            RuleKind::parse(&r.kind).ok_or_else(|| invalid(format!("unknown rule {}", r.kind)))?;
        }
        if let Some(l) = &self.loss {
            LossModel::power(ValueSpace::Reals, l.power)?;
        }
        if let Some(t) = &self.target {
            t.build()?;
        }
        if let Some(s) = &self.schedule {
            if let Some(d) = &s.deltas {
                match &s.horizons {
                    Some(h) => PartitionSchedule::with_horizons(d, h)?,
                    None => PartitionSchedule::from_deltas(d)?,
                };
                if s.k_max.is_some_and(|k| k != d.len()) {
                    return Err(invalid("k_max disagrees with the number of deltas"));
                }
            }
        }
        let p = &self.params;
        match kind {
            ExperimentKind::Consistency | ExperimentKind::BayesExcess => {
                need(self.sampler.is_some(), "[sampler]")?;
                need(self.rule.is_some(), "[rule]")?;
                need(self.target.is_some(), "[target]")?;
                need(self.experiment.horizon.is_some(), "experiment.horizon")?;
                if kind == ExperimentKind::Consistency
                    && !matches!(self.sampler, Some(SamplerConfig::FiniteSupport { .. }))
                {
                    return Err(invalid("consistency needs a finite-support sampler"));
                }
            }
            ExperimentKind::PartitionFmv => {
                need(self.sampler.is_some(), "[sampler]")?;
                let s = self.schedule.as_ref();
                let explicit = s.and_then(|s| s.deltas.as_ref()).is_some();
                need(!explicit || s.and_then(|s| s.horizons.as_ref()).is_some(), "schedule.horizons with deltas")?;
            }
            ExperimentKind::Lemma1 => {
                need(self.schedule.as_ref().and_then(|s| s.deltas.as_ref()).is_some(), "schedule.deltas")?;
                need(p.set.is_some() || p.set_size.is_some(), "params.set or params.set_size")?;
            }
            ExperimentKind::Lemma2Tail => {
                need(self.schedule.as_ref().and_then(|s| s.deltas.as_ref()).is_some(), "schedule.deltas")?;
                need(p.points.is_some(), "params.points")?;
            }
            ExperimentKind::Adversary => {
                need(self.sampler.is_some(), "[sampler]")?;
                need(self.experiment.horizon.is_some(), "experiment.horizon")?;
            }
            ExperimentKind::FoolTest => {
                let test = p.test.as_deref().unwrap_or("novelty-window");
                hypothesis_test(test)?;
            }
            ExperimentKind::FrechetConvergence => {
                need(p.law_values.is_some(), "params.law_values")?;
                need(p.sample_sizes.is_some(), "params.sample_sizes")?;
            }
        }
        Ok(())
    }
}

fn hypothesis_test(name: &str) -> Result<Box<dyn HypothesisTest>, HarnessError> {
    Ok(match name {
        "novelty-window" => Box::new(NoveltyWindowTest),
        "constant-1" => Box::new(ConstantTest(true)),
        "constant-0" => Box::new(ConstantTest(false)),
        "coin-flip" => Box::new(CoinFlipTest),
        other => return Err(invalid(format!("unknown hypothesis test {other}"))),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<Vec<String>>,
    pub verdicts: Vec<Verdict>,
    pub wall_time: Duration,
}

impl ExperimentReport {
    pub fn kind(&self) -> ExperimentKind {
        self.config.kind()
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.kind().columns())?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("ascii fields"))
    }

    /// Config echo, seed, timing and verdicts; kept out of the CSV so the
    /// CSV stays reproducible.
    pub fn meta(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# kind = {}", self.kind().as_str()).unwrap();
        writeln!(out, "# seed = {}", self.config.experiment.seed).unwrap();
        writeln!(out, "# wall_time_s = {:.3}", self.wall_time.as_secs_f64()).unwrap();
        for v in &self.verdicts {
            writeln!(out, "# verdict {} = {} ({})", v.name, if v.pass { "pass" } else { "fail" }, v.detail).unwrap();
        }
        out.push_str(&self.config.to_toml());
        out
    }

    /// Writes `path` (CSV) and `path.meta`.
    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.csv()?)?;
        std::fs::write(meta_path(path), self.meta())?;
        Ok(())
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn flag(b: bool) -> String {
    (if b { "1" } else { "0" }).to_string()
}

fn kind_seed(config: &ExperimentConfig) -> u64 {
    seeding::derive(config.experiment.seed, &[seeding::tag(config.kind().as_str())])
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let (rows, verdicts) = match config.kind() {
        ExperimentKind::Consistency => consistency(config)?,
        ExperimentKind::PartitionFmv => partition_fmv(config)?,
        ExperimentKind::Lemma1 => lemma1(config)?,
        ExperimentKind::Lemma2Tail => lemma2_tail(config)?,
        ExperimentKind::Adversary => adversary(config)?,
        ExperimentKind::FoolTest => fool_test(config)?,
        ExperimentKind::FrechetConvergence => frechet_convergence(config)?,
        ExperimentKind::BayesExcess => bayes_excess(config)?,
    };
    Ok(ExperimentReport { config: config.clone(), rows, verdicts, wall_time: start.elapsed() })
}

type Outcome = (Vec<Vec<String>>, Vec<Verdict>);

fn loss_of(config: &ExperimentConfig) -> Result<LossModel, HarnessError> {
    Ok(LossModel::power(ValueSpace::Reals, config.loss.as_ref().map_or(2.0, |l| l.power))?)
}

fn rule_of(config: &ExperimentConfig) -> RuleKind {
    config.rule.as_ref().and_then(|r| RuleKind::parse(&r.kind)).unwrap_or(RuleKind::Memorization)
}

fn sampler_of(config: &ExperimentConfig, seed: u64) -> Result<ProcessSampler, HarnessError> {
    let s = config.sampler.as_ref().ok_or_else(|| invalid("missing [sampler]"))?;
    Ok(ProcessSampler::new(s.kind(), seed)?)
}

fn trials_of(config: &ExperimentConfig, default: usize) -> usize {
    config.experiment.trials.unwrap_or(default)
}

fn schedule_of(config: &ExperimentConfig, sampler: Option<&ProcessSampler>) -> Result<PartitionSchedule, HarnessError> {
    let s = config.schedule.clone().unwrap_or_default();
    if let Some(deltas) = &s.deltas {
        return Ok(match &s.horizons {
            Some(h) => PartitionSchedule::with_horizons(deltas, h)?,
            None => PartitionSchedule::from_deltas(deltas)?,
        });
    }
    let sampler = sampler.ok_or_else(|| invalid("schedule.deltas or a sampler is required"))?;
    Ok(estimate_schedule(
        sampler,
        s.k_max.unwrap_or(crate::partition::DEFAULT_K_MAX),
        s.trials.unwrap_or(1000),
        s.max_horizon.unwrap_or(1_000_000),
    )?)
}

fn consistency(config: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let loss = loss_of(config)?;
    let rule = rule_of(config);
    let target = config.target.as_ref().expect("validated").build()?;
    let horizon = config.experiment.horizon.expect("validated");
    let base = kind_seed(config);
    let space = MetricSpace::unit_interval();
    let support_size = match config.sampler.as_ref() {
        Some(SamplerConfig::FiniteSupport { support, .. }) => {
            support.iter().map(|x| x.to_bits()).collect::<std::collections::HashSet<_>>().len()
        }
        _ => unreachable!("validated"),
    };
    let runs = trials_of(config, 100);
    let results: Vec<(usize, f64, f64)> = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let sampler = sampler_of(config, seeding::derive(base, &[run]))?;
            let mut learner = rule.build(&loss, &space);
            let out = run_online(learner.as_mut(), &sampler, &target, &loss, horizon);
            let y0 = loss.default_value();
            let max_default = out.xs.iter().map(|x| loss.evaluate(&y0, &target.value(x))).fold(0.0, f64::max);
            Ok((out.trajectory.nonzero_rounds(), max_default, out.trajectory.final_average()))
        })
        .collect::<Result<_, HarnessError>>()?;
    let mut rows = Vec::with_capacity(runs);
    let mut failures = 0;
    for (run, &(nonzero, max_default, average)) in results.iter().enumerate() {
        let bound = support_size as f64 * max_default / horizon as f64;
        let pass = nonzero <= support_size && average <= bound;
        failures += usize::from(!pass);
        rows.push(vec![
            run.to_string(),
            support_size.to_string(),
            nonzero.to_string(),
            fmt_f64(max_default),
            fmt_f64(average),
            fmt_f64(bound),
            flag(pass),
        ]);
    }
    let verdict = Verdict {
        name: "mistakes-at-most-support-size".into(),
        pass: failures == 0,
        detail: format!("{failures} of {runs} runs exceeded the bound"),
    };
    Ok((rows, vec![verdict]))
}

fn partition_fmv(config: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let base = kind_seed(config);
    let sampler = sampler_of(config, seeding::derive(base, &[seeding::tag("process")]))?;
    let schedule = schedule_of(config, Some(&sampler))?;
    let margin = config.params.margin.unwrap_or(0.03);
    let trials = trials_of(config, 2000);
    let fmv = fmv_hit_frequencies(&sampler, &schedule, trials, seeding::derive(base, &[seeding::tag("partition")]))?;
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for r in &fmv {
        let required = r.bound - margin;
        let pass = r.hit.estimate >= required;
        if !pass {
            failed.push(r.level);
        }
        rows.push(vec![
            r.level.to_string(),
            r.horizon.to_string(),
            fmt_f64(schedule.level(r.level).delta),
            r.trials.to_string(),
            r.hits.to_string(),
            fmt_f64(r.hit.estimate),
            fmt_f64(r.hit.lower),
            fmt_f64(r.bound),
            fmt_f64(required),
            flag(pass),
        ]);
    }
    let verdict =
        Verdict { name: "hit-frequency".into(), pass: failed.is_empty(), detail: format!("failing levels {failed:?}") };
    Ok((rows, vec![verdict]))
}

fn lemma1(config: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let schedule = schedule_of(config, None)?;
    let p = &config.params;
    let level = p.level.unwrap_or(1);
    let set = match (&p.set, p.set_size) {
        (Some(set), _) => set.clone(),
        (None, Some(n)) => (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect(),
        (None, None) => unreachable!("validated"),
    };
    let margin = p.margin.unwrap_or(0.012);
    let trials = trials_of(config, 10_000);
    let r = mc_check_lemma1(&schedule, level, &set, trials, kind_seed(config))?;
    let pass = r.miss.upper <= r.bound + margin;
    let row = vec![
        level.to_string(),
        fmt_f64(schedule.level(level).delta),
        set.len().to_string(),
        trials.to_string(),
        r.misses.to_string(),
        fmt_f64(r.miss.estimate),
        fmt_f64(r.miss.upper),
        fmt_f64(r.bound),
        fmt_f64(margin),
        flag(pass),
    ];
    let verdict = Verdict {
        name: "miss-bound".into(),
        pass,
        detail: format!("upper {:.4} vs bound {:.4} + {margin}", r.miss.upper, r.bound),
    };
    Ok((vec![row], vec![verdict]))
}

fn lemma2_tail(config: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let schedule = schedule_of(config, None)?;
    let points = config.params.points.clone().expect("validated");
    let trials = trials_of(config, 10_000);
    let tail = mc_check_tail(&schedule, &points, trials, kind_seed(config))?;
    let mut rows = Vec::new();
    let mut failures = 0;
    for r in &tail {
        let pass = r.member.upper < r.bound;
        failures += usize::from(!pass);
        rows.push(vec![
            fmt_f64(r.point),
            r.level.to_string(),
            trials.to_string(),
            r.hits.to_string(),
            fmt_f64(r.member.estimate),
            fmt_f64(r.member.upper),
            fmt_f64(r.bound),
            flag(pass),
        ]);
    }
    let verdict = Verdict {
        name: "tail-decay".into(),
        pass: failures == 0,
        detail: format!("{failures} of {} (point, level) pairs above the bound", tail.len()),
    };
    Ok((rows, vec![verdict]))
}

fn adversary(config: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let base = kind_seed(config);
    let sampler = sampler_of(config, seeding::derive(base, &[seeding::tag("process")]))?;
    let loss = loss_of(config)?;
    let horizon = config.experiment.horizon.expect("validated");
    let runs = trials_of(config, 500);
    let threshold_trials = config.params.threshold_trials.unwrap_or(1000);
    let factor = config.params.factor.unwrap_or(0.9);
    let schedule = schedule_of(config, Some(&sampler))?;
    let partition_seed =
        config.schedule.as_ref().and_then(|s| s.seed).unwrap_or(seeding::derive(base, &[seeding::tag("partition")]));
    let support = rollout_support(&sampler, threshold_trials.max(runs), horizon);
    let partition = Arc::new(RandomPartition::build_for_support(
        &schedule,
        &support,
        partition_seed,
        crate::partition::MC_EXPLICIT_CAP,
    )?);
    let thresholds = estimate_first_visit_thresholds(&sampler, &partition, threshold_trials, horizon)?;
    let report = evaluate_defeat(
        Challenger::Rule(rule_of(config)),
        &sampler,
        partition,
        &thresholds,
        &loss,
        &MetricSpace::unit_interval(),
        runs,
        horizon,
        seeding::derive(base, &[seeding::tag("targets")]),
    )?;
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (row, th) in report.rows.iter().zip(&thresholds.levels) {
        let (mean_loss, loss_lower) = row.first_visit_loss.map_or((f64::NAN, f64::NAN), |s| (s.estimate, s.lower));
        let (mean_avg, avg_lower) = row.running_average.map_or((f64::NAN, f64::NAN), |s| (s.estimate, s.lower));
        let pass = row.visits == 0 || (mean_loss >= factor * row.threshold as f64 && mean_avg >= factor);
        if !pass {
            failed.push(row.level);
        }
        rows.push(vec![
            row.level.to_string(),
            row.threshold.to_string(),
            flag(th.reachable),
            flag(th.certified),
            row.visits.to_string(),
            fmt_f64(mean_loss),
            fmt_f64(loss_lower),
            fmt_f64(mean_avg),
            fmt_f64(avg_lower),
            flag(pass),
        ]);
    }
    let verdict = Verdict {
        name: "first-visit-loss".into(),
        pass: failed.is_empty(),
        detail: format!("failing levels {failed:?}"),
    };
    Ok((rows, vec![verdict]))
}

fn fool_test(config: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let p = &config.params;
    let test = hypothesis_test(p.test.as_deref().unwrap_or("novelty-window"))?;
    let switches = p.switches.unwrap_or(4);
    let replays = trials_of(config, 200);
    let transcript = fool_hypothesis_test(
        test.as_ref(),
        &unit_distinct_points,
        switches,
        replays,
        p.cap.unwrap_or(100_000),
        kind_seed(config),
    )?;
    let mut rows = Vec::new();
    let mut all = true;
    for r in &transcript.switches {
        let pass = match r.mode {
            Mode::Constant => r.frequency_one > 0.75,
            Mode::Distinct => r.frequency_one < 0.25,
        };
        all &= pass;
        let mode = match r.mode {
            Mode::Constant => "constant",
            Mode::Distinct => "distinct",
        };
        rows.push(vec![
            r.k.to_string(),
            r.n.to_string(),
            mode.to_string(),
            r.replays.to_string(),
            fmt_f64(r.frequency_one),
            flag(pass),
        ]);
    }
    let verdict = Verdict {
        name: "oscillating-decisions".into(),
        pass: all && transcript.switches.len() >= switches,
        detail: format!("switch indices {:?}", transcript.switch_indices()),
    };
    Ok((rows, vec![verdict]))
}

fn frechet_convergence(config: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let p = &config.params;
    let values = p.law_values.clone().expect("validated");
    let weights = p.law_weights.clone().unwrap_or_else(|| vec![1.0; values.len()]);
    let law = FiniteLaw::new(values.into_iter().map(Point::Scalar).collect(), weights, ValueSpace::Reals)?;
    let power = config.loss.as_ref().map_or(2.0, |l| l.power);
    let tolerance = p.tolerance.unwrap_or(0.05);
    let trials = trials_of(config, 100);
    let sizes = p.sample_sizes.clone().expect("validated");
    let report = check_convergence(&law, power, &sizes, trials, kind_seed(config))?;
    let last = report.rows.len() - 1;
    let mut rows = Vec::new();
    let mut pass_last = false;
    for (i, r) in report.rows.iter().enumerate() {
        let pass = r.mean_gap <= tolerance;
        if i == last {
            pass_last = pass;
        }
        rows.push(vec![
            r.n.to_string(),
            trials.to_string(),
            fmt_f64(report.population_risk),
            fmt_f64(r.mean_gap),
            fmt_f64(r.gap.upper),
            fmt_f64(tolerance),
            flag(pass),
        ]);
    }
    let verdict = Verdict {
        name: "risk-gap-at-largest-n".into(),
        pass: pass_last,
        detail: format!("mean gap {:.5} at n = {}", report.rows[last].mean_gap, report.rows[last].n),
    };
    Ok((rows, vec![verdict]))
}

fn bayes_excess(config: &ExperimentConfig) -> Result<Outcome, HarnessError> {
    let loss = loss_of(config)?;
    let rule = rule_of(config);
    let target = config.target.as_ref().expect("validated").build()?;
    let horizon = config.experiment.horizon.expect("validated");
    let tolerance = config.params.tolerance.unwrap_or(0.05);
    let fraction = config.params.required_fraction.unwrap_or(0.95);
    let runs = trials_of(config, 100);
    let base = kind_seed(config);
    let space = MetricSpace::unit_interval();
    let excess: Vec<f64> = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let sampler = sampler_of(config, seeding::derive(base, &[run]))?;
            let mut learner = rule.build(&loss, &space);
            let out = run_online(learner.as_mut(), &sampler, &target as &dyn LabelSource, &loss, horizon);
            Ok(excess_loss(&out, &target, &loss).final_excess())
        })
        .collect::<Result<_, HarnessError>>()?;
    let mut rows = Vec::new();
    let mut passes = 0;
    for (run, &e) in excess.iter().enumerate() {
        let pass = e <= tolerance;
        passes += usize::from(pass);
        rows.push(vec![run.to_string(), fmt_f64(e), fmt_f64(tolerance), flag(pass)]);
    }
    let required = (fraction * runs as f64).ceil() as usize;
    let verdict = Verdict {
        name: "excess-within-tolerance".into(),
        pass: passes >= required,
        detail: format!("{passes} of {runs} runs (need {required})"),
    };
    Ok((rows, vec![verdict]))
}
