//! `margin-maxer`: dataset generation, reference solvers, GD/NGD/PRGD runs,
//! comparisons, vector fields and rate fits.

mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use margin_maxer::analysis::{Bounds, Metric};
use margin_maxer::dataset::{Family, DEFAULT_SEED};
use margin_maxer::optimizers::{ScheduleKind, StepKind};
use margin_maxer::reference::SolveMethod;
use margin_maxer::SyntheticSpec;

use config::{Algorithm, DatasetSource, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "margin-maxer", version, about)]
struct Cli {
    /// Seed for synthetic datasets (overrides the config's).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file of the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment config JSON used as the base for the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset CSV.
    Gen(DatasetArgs),
    /// Compute the max-margin direction and value.
    Solve {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Dual)]
        method: MethodArg,
        /// NGD steps for `--method ngd`.
        #[arg(long, default_value_t = commands::NGD_REFERENCE_STEPS)]
        ngd_steps: usize,
    },
    /// Run one optimizer and write its trajectory and summary.
    Run(RunArgs),
    /// Run several configs on one dataset and merge their gap curves.
    Compare {
        /// Experiment config files, one per column.
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Sample the normalized negative gradient field on a grid.
    Field {
        #[command(flatten)]
        data: DatasetArgs,
        /// W1_MIN W1_MAX W2_MIN W2_MAX
        #[arg(long, num_args = 4, allow_negative_numbers = true, default_values_t = [0.0, 10.0, -1.0, 2.0])]
        bounds: Vec<f64>,
        /// NX NY
        #[arg(long, num_args = 2, default_values_t = [21, 21])]
        resolution: Vec<usize>,
    },
    /// Fit the three rate families to a trajectory CSV.
    Fit {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::MarginGap)]
        metric: MetricArg,
        /// T_MIN T_MAX
        #[arg(long, num_args = 2)]
        window: Option<Vec<f64>>,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct DatasetArgs {
    /// Dataset CSV (columns x0..x{d-1},y).
    #[arg(long, conflicts_with = "family")]
    data: Option<PathBuf>,
    /// Rescale rows with norm above 1 instead of rejecting them.
    #[arg(long, requires = "data")]
    rescale: bool,
    /// Synthetic family: toy, sphere-cap (Dataset I) or ball-cap (Dataset II).
    #[arg(long)]
    family: Option<Family>,
    /// Max margin of the synthetic family.
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Number of points (cap families).
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    warmup_kind: Option<StepArg>,
    #[arg(long)]
    warmup_steps: Option<usize>,
    #[arg(long, value_enum)]
    schedule: Option<ScheduleArg>,
    #[arg(long)]
    spacing: Option<usize>,
    #[arg(long)]
    base: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    t0: Option<usize>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    stop_gap: Option<f64>,
    #[arg(long)]
    log_stride: Option<usize>,
    /// T_MIN T_MAX
    #[arg(long, num_args = 2)]
    fit_window: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    reference: Option<MethodArg>,
    #[arg(long)]
    label: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MethodArg {
    Exact,
    Dual,
    Ngd,
}

impl From<MethodArg> for SolveMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => SolveMethod::Exact,
            MethodArg::Dual => SolveMethod::Dual,
            MethodArg::Ngd => SolveMethod::Ngd,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum StepArg {
    Gd,
    Ngd,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ScheduleArg {
    ExpRadius,
    PolyRadius,
    PolyBoth,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MetricArg {
    MarginGap,
    DirErr,
}

fn base_config(path: &Option<PathBuf>) -> Result<Option<ExperimentConfig>> {
    path.as_deref().map(ExperimentConfig::from_file).transpose()
}

/// Dataset from flags, else from the config file.
fn dataset_source(
    args: &DatasetArgs,
    seed: Option<u64>,
    base: Option<&ExperimentConfig>,
) -> Result<DatasetSource> {
    if let Some(path) = &args.data {
        return Ok(DatasetSource::File {
            path: path.clone(),
            rescale: args.rescale,
        });
    }
    if let Some(family) = args.family {
        let mut spec = match family {
            Family::Toy => SyntheticSpec::toy(0.5),
            Family::SphereCap => SyntheticSpec::sphere_cap(DEFAULT_SEED),
            Family::BallCap => SyntheticSpec::ball_cap(DEFAULT_SEED),
        };
        if let Some(g) = args.gamma {
            spec.gamma_star = g;
        }
        if let Some(n) = args.n {
            spec.n = n;
        }
        spec.seed = seed.unwrap_or(DEFAULT_SEED);
        spec.validate()?;
        return Ok(DatasetSource::Synthetic(spec));
    }
    match base {
        Some(cfg) => {
            let mut source = cfg.dataset.clone();
            if let (DatasetSource::Synthetic(spec), Some(s)) = (&mut source, seed) {
                spec.seed = s;
            }
            Ok(source)
        }
        None => bail!("no dataset given: pass --data, --family, or --config"),
    }
}

fn pair<T: Copy>(v: &Option<Vec<T>>) -> Option<(T, T)> {
    v.as_ref().map(|v| (v[0], v[1]))
}

fn run_config(args: RunArgs, cli: &Cli) -> Result<ExperimentConfig> {
    let base = base_config(&cli.config)?;
    let data_given = args.data.data.is_some() || args.data.family.is_some();
    let mut cfg = match base {
        Some(cfg) if !data_given => cfg,
        base => {
            let source = dataset_source(&args.data, cli.seed, base.as_ref())?;
            let algorithm = args
                .algorithm
                .or(base.as_ref().map(|b| b.algorithm))
                .unwrap_or(Algorithm::Prgd);
            match base {
                Some(b) => ExperimentConfig {
                    dataset: source,
                    ..b
                },
                None => ExperimentConfig::new(source, algorithm),
            }
        }
    };
    if let Some(a) = args.algorithm {
        cfg.algorithm = a;
    }
    if let Some(eta) = args.eta {
        cfg.eta = eta;
    }
    if let Some(k) = args.warmup_kind {
        cfg.warmup.kind = match k {
            StepArg::Gd => StepKind::Gd,
            StepArg::Ngd => StepKind::Ngd,
        };
    }
    if let Some(s) = args.warmup_steps {
        cfg.warmup.steps = s;
    }
    if let Some(kind) = args.schedule {
        cfg.schedule.kind = match kind {
            ScheduleArg::ExpRadius => ScheduleKind::ExpRadius,
            ScheduleArg::PolyRadius => ScheduleKind::PolyRadius,
            ScheduleArg::PolyBoth => ScheduleKind::PolyBoth,
        };
    }
    let s = &mut cfg.schedule;
    s.spacing = args.spacing.unwrap_or(s.spacing);
    s.base = args.base.unwrap_or(s.base);
    s.alpha = args.alpha.unwrap_or(s.alpha);
    s.beta = args.beta.unwrap_or(s.beta);
    s.t0 = args.t0.unwrap_or(s.t0);
    s.r0 = args.r0.or(s.r0);
    cfg.budget = args.budget.unwrap_or(cfg.budget);
    cfg.stop_gap = args.stop_gap.or(cfg.stop_gap);
    cfg.log_stride = args.log_stride.unwrap_or(cfg.log_stride);
    cfg.fit_window = pair(&args.fit_window).or(cfg.fit_window);
    cfg.reference = args.reference.map(SolveMethod::from).or(cfg.reference);
    cfg.label = args.label.or(cfg.label);
    cfg.out_path = cli.out.clone().or(cfg.out_path);
    cfg.resolve(cli.seed)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MARGIN_MAXER_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let out_or = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));
    match &cli.command {
        Command::Gen(args) => {
            let base = base_config(&cli.config)?;
            match dataset_source(args, cli.seed, base.as_ref())? {
                DatasetSource::Synthetic(spec) => commands::gen(spec, &out_or("dataset.csv")),
                DatasetSource::File { .. } => bail!("gen needs a synthetic family, not --data"),
            }
        }
        Command::Solve {
            data,
            method,
            ngd_steps,
        } => {
            let base = base_config(&cli.config)?;
            let source = dataset_source(data, cli.seed, base.as_ref())?;
            commands::solve(&source, (*method).into(), *ngd_steps, cli.out.as_deref())
        }
        Command::Run(args) => {
            let cfg = run_config(args.clone(), &cli)?;
            commands::run(cfg)
        }
        Command::Compare { configs } => {
            if cli.config.is_some() {
                bail!("compare takes config files as arguments, not --config");
            }
            let configs = configs
                .iter()
                .map(|p| ExperimentConfig::from_file(p)?.resolve(cli.seed))
                .collect::<Result<Vec<_>>>()?;
            commands::compare(configs, &out_or("compare.csv"))
        }
        Command::Field {
            data,
            bounds,
            resolution,
        } => {
            let base = base_config(&cli.config)?;
            let source = dataset_source(data, cli.seed, base.as_ref())?;
            let bounds = Bounds {
                w1: (bounds[0], bounds[1]),
                w2: (bounds[2], bounds[3]),
            };
            commands::field(&source, bounds, (resolution[0], resolution[1]), &out_or("field.csv"))
        }
        Command::Fit {
            trajectory,
            metric,
            window,
        } => {
            if cli.config.is_some() {
                bail!("fit reads a trajectory file and takes no --config");
            }
            let metric = match metric {
                MetricArg::MarginGap => Metric::MarginGap,
                MetricArg::DirErr => Metric::DirErr,
            };
            commands::fit(trajectory, metric, pair(window), cli.out.as_deref())
        }
    }
}
