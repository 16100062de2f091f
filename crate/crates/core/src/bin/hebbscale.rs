use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hebbscale::geometry::predicted_max_overlap;
use hebbscale::harness::{
    derive_seed, fit_scaling, read_scaling_csv, run_experiment, ExperimentConfig, ExperimentKind, ScalingModel,
    Schedule,
};
use hebbscale::landscape::census;
use hebbscale::reduced::{gradient_stats, log_grid, predict_learning_time};
use hebbscale::{DistributionKind, Error, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_FAILED_TRIALS: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "hebbscale", version, about = "Hebbian feature-learning simulations and scaling experiments")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV files and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with experiment settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    /// Input dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Feature counts, comma separated (default K = N).
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Latent distributions: laplace, chi2, chi2:<q>.
    #[arg(long, value_delimiter = ',')]
    dist: Vec<DistributionKind>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct LearnArgs {
    /// Fixed learning rate.
    #[arg(long, conflicts_with = "adaptive")]
    eta: Option<f64>,
    /// Optimal rate from gradient statistics.
    #[arg(long)]
    adaptive: bool,
    /// Overlap at which a run counts as learned.
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    record_every: Option<u64>,
    /// Rectifier threshold.
    #[arg(long)]
    theta: Option<f64>,
    /// Samples per gradient-statistics grid point.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FitModel {
    Pure,
    Log,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the number of minima, maxima and saddles on the sphere.
    Census {
        #[arg(long)]
        n: usize,
    },
    /// Largest overlap of random directions with the features.
    Geometry(GridArgs),
    /// Gradient magnitude over the sphere in three dimensions.
    Landscape3d {
        #[arg(long)]
        dist: Option<DistributionKind>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Mean and spread of the overlap gradient on a grid of overlaps.
    Gradstats {
        #[arg(long, value_delimiter = ',')]
        dist: Vec<DistributionKind>,
        #[arg(long)]
        theta: Option<f64>,
        /// `lo,hi,points` of the log-spaced grid.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Full learning trajectories.
    Simulate {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        learn: LearnArgs,
    },
    /// Learning time predicted from gradient statistics.
    PredictTime {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "chi2")]
        dist: DistributionKind,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Starting overlap (default: predicted initial overlap).
        #[arg(long)]
        d0: Option<f64>,
        #[arg(long)]
        target: Option<f64>,
    },
    /// Learning time against input dimension.
    Scaling {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        learn: LearnArgs,
    },
    /// Power-law fit of a scaling table.
    Fit {
        /// Scaling table (default: <out>/scaling.csv).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "log")]
        model: FitModel,
        /// Power of ln K in the log-corrected model.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// Settings for `kind`: the config file if given, else per-command defaults.
fn base_config(cli: &Cli, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => {
            let mut cfg = ExperimentConfig::default();
            match kind {
                ExperimentKind::OverlapGeometry => {
                    cfg.n = vec![10, 100, 1000, 10_000];
                    cfg.k = vec![10];
                    cfg.trials = 10_000;
                }
                ExperimentKind::Trajectories => {
                    cfg.n = vec![10];
                    cfg.trials = 1;
                }
                ExperimentKind::Landscape3d => {
                    cfg.n = vec![3];
                    cfg.dist = vec![DistributionKind::SymmetricLaplace];
                }
                ExperimentKind::Gradstats | ExperimentKind::Scaling => {}
            }
            cfg
        }
    };
    cfg.experiment = kind;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn apply_grid(cfg: &mut ExperimentConfig, grid: &GridArgs) {
    if !grid.n.is_empty() {
        cfg.n = grid.n.clone();
        if grid.k.is_empty() {
            cfg.k.clear();
        }
    }
    if !grid.k.is_empty() {
        cfg.k = grid.k.clone();
    }
    if !grid.dist.is_empty() {
        cfg.dist = grid.dist.clone();
    }
    if let Some(t) = grid.trials {
        cfg.trials = t;
    }
}

fn apply_learn(cfg: &mut ExperimentConfig, learn: &LearnArgs) {
    if let Some(eta) = learn.eta {
        cfg.schedule = Schedule::Fixed;
        cfg.eta = Some(eta);
    }
    if learn.adaptive {
        cfg.schedule = Schedule::Adaptive;
    }
    if let Some(t) = learn.target {
        cfg.target_overlap = t;
    }
    if let Some(m) = learn.max_steps {
        cfg.max_steps = m;
    }
    if let Some(r) = learn.record_every {
        cfg.record_every = r;
    }
    if let Some(theta) = learn.theta {
        cfg.threshold = theta;
    }
    if let Some(s) = learn.samples {
        cfg.samples = s;
    }
}

fn run_and_report(cfg: &ExperimentConfig) -> Result<ExitCode> {
    let manifest = run_experiment(cfg)?;
    for f in &manifest.files {
        println!("{}: {} rows", cfg.out.join(&f.name).display(), f.rows);
    }
    if !manifest.failed_trials.is_empty() {
        eprintln!("{} failed trials (see manifest.json)", manifest.failed_trials.len());
    }
    if manifest.has_invalid_points() {
        for p in &manifest.invalid_points {
            eprintln!("invalid point n={} k={} dist={}: {}/{} trials failed", p.n, p.k, p.dist, p.n_failed, p.n_trials);
        }
        return Ok(ExitCode::from(EXIT_FAILED_TRIALS));
    }
    Ok(ExitCode::SUCCESS)
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Census { n } => {
            let c = census(*n)?;
            println!("minima,maxima,saddles");
            println!("{},{},{}", c.minima, c.maxima, c.saddles);
            Ok(ExitCode::SUCCESS)
        }
        Command::Geometry(grid) => {
            let mut cfg = base_config(&cli, ExperimentKind::OverlapGeometry)?;
            apply_grid(&mut cfg, grid);
            run_and_report(&cfg)
        }
        Command::Landscape3d { dist, theta, resolution, samples } => {
            let mut cfg = base_config(&cli, ExperimentKind::Landscape3d)?;
            if let Some(d) = dist {
                cfg.dist = vec![*d];
            }
            if let Some(t) = theta {
                cfg.threshold = *t;
            }
            if let Some(r) = resolution {
                cfg.resolution = *r;
            }
            if let Some(s) = samples {
                cfg.field_samples = *s;
            }
            run_and_report(&cfg)
        }
        Command::Gradstats { dist, theta, grid, samples } => {
            let mut cfg = base_config(&cli, ExperimentKind::Gradstats)?;
            if !dist.is_empty() {
                cfg.dist = dist.clone();
            }
            if let Some(t) = theta {
                cfg.threshold = *t;
            }
            if let Some(g) = grid {
                if g[2].fract() != 0.0 || g[2] < 2.0 {
                    return Err(Error::Config("grid point count must be an integer >= 2".into()));
                }
                (cfg.grid_lo, cfg.grid_hi, cfg.grid_points) = (g[0], g[1], g[2] as usize);
            }
            if let Some(s) = samples {
                cfg.samples = *s;
            }
            run_and_report(&cfg)
        }
        Command::Simulate { grid, learn } => {
            let mut cfg = base_config(&cli, ExperimentKind::Trajectories)?;
            apply_grid(&mut cfg, grid);
            apply_learn(&mut cfg, learn);
            run_and_report(&cfg)
        }
        Command::Scaling { grid, learn } => {
            let mut cfg = base_config(&cli, ExperimentKind::Scaling)?;
            apply_grid(&mut cfg, grid);
            apply_learn(&mut cfg, learn);
            run_and_report(&cfg)
        }
        Command::PredictTime { n, k, dist, theta, samples, d0, target } => {
            let cfg = base_config(&cli, ExperimentKind::Gradstats)?;
            let k = k.unwrap_or(*n);
            let theta = theta.unwrap_or(cfg.threshold);
            let target = target.unwrap_or(cfg.target_overlap);
            let d0 = match d0 {
                Some(d) => *d,
                None => predicted_max_overlap(*n, k)?.max(cfg.grid_lo),
            };
            let grid = log_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_points)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, u64::MAX, 0));
            let stats = gradient_stats(*dist, theta, &grid, samples.unwrap_or(cfg.samples), &mut rng)?;
            let t = predict_learning_time(&stats, *n, d0, target)?;
            println!("n,k,dist,d0,target,T");
            println!("{n},{k},{dist},{d0},{target},{t}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit { input, model, p } => {
            let path = match input {
                Some(p) => p.clone(),
                None => cli.out.clone().unwrap_or_else(|| PathBuf::from("out")).join("scaling.csv"),
            };
            let records = read_scaling_csv(&path)?;
            let model = match model {
                FitModel::Pure => ScalingModel::PurePower,
                FitModel::Log => ScalingModel::LogCorrected { p: *p },
            };
            let fit = fit_scaling(&records, model)?;
            println!("{}", serde_json::to_string_pretty(&fit)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
