use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ulab::frechet::{frechet_mean, FrechetProblem};
use ulab::harness::{fmt_f64, run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport, HarnessError};
use ulab::metric_space::Point;
use ulab::partition::{estimate_schedule, PartitionSchedule, RandomPartition, DEFAULT_K_MAX};
use ulab::process::ProcessSampler;

#[derive(Parser)]
#[command(name = "ulab", version, about = "Online learning simulation lab with unbounded losses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (a directory for `verify-all`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trials, runs or redraws; overrides the config.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by `--config`.
    Simulate(Common),
    /// Realize a partition and print it as text.
    Partition(Common),
    Lemma1(Common),
    Tail(Common),
    Adversary(Common),
    FoolTest(Common),
    /// Empirical Fréchet mean of real samples.
    Frechet {
        /// Comma-separated samples.
        #[arg(long, conflicts_with = "file")]
        samples: Option<String>,
        /// One sample per line.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        power: f64,
    },
    /// Run every experiment kind with its default config.
    VerifyAll(Common),
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load(common: &Common, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match (&common.config, kind) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(kind)) => ExperimentConfig::default_for(kind),
        (None, None) => return Err(HarnessError::ConfigInvalid("--config is required".into())),
    };
    if let Some(kind) = kind {
        if config.kind() != kind {
            return Err(HarnessError::ConfigInvalid(format!(
                "config describes {}, expected {}",
                config.kind().as_str(),
                kind.as_str()
            )));
        }
    }
    if let Some(seed) = common.seed {
        config.experiment.seed = seed;
    }
    if common.trials.is_some() {
        config.experiment.trials = common.trials;
    }
    if let Some(out) = &common.out {
        config.experiment.output = Some(out.to_string_lossy().into_owned());
    }
    config.validate()?;
    Ok(config)
}

fn emit(report: &ExperimentReport) -> Result<bool, HarnessError> {
    match &report.config.experiment.output {
        Some(path) => report.write(Path::new(path))?,
        None => print!("{}", report.csv()?),
    }
    for v in &report.verdicts {
        eprintln!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    Ok(report.passed())
}

fn experiment(common: &Common, kind: Option<ExperimentKind>) -> Result<bool, HarnessError> {
    let config = load(common, kind)?;
    emit(&run_experiment(&config)?)
}

fn run(command: Command) -> Result<bool, HarnessError> {
    match command {
        Command::Simulate(c) => experiment(&c, None),
        Command::Lemma1(c) => experiment(&c, Some(ExperimentKind::Lemma1)),
        Command::Tail(c) => experiment(&c, Some(ExperimentKind::Lemma2Tail)),
        Command::Adversary(c) => experiment(&c, Some(ExperimentKind::Adversary)),
        Command::FoolTest(c) => experiment(&c, Some(ExperimentKind::FoolTest)),
        Command::Partition(c) => partition(&c),
        Command::Frechet { samples, file, power } => frechet(samples, file, power),
        Command::VerifyAll(c) => verify_all(&c),
    }
}

fn partition(common: &Common) -> Result<bool, HarnessError> {
    let config = match &common.config {
        Some(path) => Some(ExperimentConfig::load(path)?),
        None => None,
    };
    let seed = common.seed.or(config.as_ref().map(|c| c.experiment.seed)).unwrap_or(0);
    let section = config.as_ref().and_then(|c| c.schedule.clone()).unwrap_or_default();
    let schedule = match (&section.deltas, config.as_ref().and_then(|c| c.sampler.as_ref())) {
        (Some(d), _) => match &section.horizons {
            Some(h) => PartitionSchedule::with_horizons(d, h)?,
            None => PartitionSchedule::from_deltas(d)?,
        },
        (None, Some(sampler)) => estimate_schedule(
            &ProcessSampler::new(sampler.kind(), seed)?,
            section.k_max.unwrap_or(DEFAULT_K_MAX),
            section.trials.unwrap_or(1000),
            section.max_horizon.unwrap_or(1_000_000),
        )?,
        (None, None) => PartitionSchedule::dyadic(section.k_max.unwrap_or(6), 4)?,
    };
    let realized = RandomPartition::build_unit_interval(&schedule, section.seed.unwrap_or(seed))?;
    let text = realized.to_text();
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn frechet(samples: Option<String>, file: Option<PathBuf>, power: f64) -> Result<bool, HarnessError> {
    let text = match (samples, file) {
        (Some(s), _) => s.replace(',', "\n"),
        (None, Some(path)) => std::fs::read_to_string(path)?,
        (None, None) => return Err(HarnessError::ConfigInvalid("give --samples or --file".into())),
    };
    let values = text
        .split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|e| HarnessError::ConfigInvalid(format!("bad sample {tok:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let problem = FrechetProblem::on_reals(&values, power)?;
    let solution = frechet_mean(&problem);
    let Point::Scalar(y) = solution.minimizer else { unreachable!("real samples") };
    println!("minimizer,empirical_risk,method,resolution");
    println!(
        "{},{},{},{}",
        fmt_f64(y),
        fmt_f64(solution.empirical_risk),
        solution.method.as_str(),
        fmt_f64(solution.resolution)
    );
    Ok(true)
}

fn verify_all(common: &Common) -> Result<bool, HarnessError> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&dir)?;
    let mut all = true;
    for kind in ExperimentKind::ALL {
        let mut config = ExperimentConfig::default_for(kind);
        if let Some(seed) = common.seed {
            config.experiment.seed = seed;
        }
        if common.trials.is_some() {
            config.experiment.trials = common.trials;
        }
        let path = dir.join(format!("{}.csv", kind.as_str()));
        config.experiment.output = Some(path.to_string_lossy().into_owned());
        let report = run_experiment(&config)?;
        report.write(&path)?;
        eprintln!(
            "{} {} ({:.1}s)",
            if report.passed() { "PASS" } else { "FAIL" },
            kind.as_str(),
            report.wall_time.as_secs_f64()
        );
        all &= report.passed();
    }
    Ok(all)
}
