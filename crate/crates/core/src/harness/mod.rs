//! Experiment orchestration: seeded parallel trials, CSV output, scaling fits.

mod config;
mod output;

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, ExperimentKind, Schedule};
pub use output::{atomic_write, write_csv};

use crate::dynamics::{default_fixed_eta, run, EtaSchedule, LearnConfig, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::measured_max_overlap;
use crate::landscape::sphere_gradient_field;
use crate::reduced::{gradient_stats, log_grid, GradientStats, PowerLawFit, MIN_FIT_POINTS};
use crate::sources::{make_source, DistributionKind, SourceSpec};
use crate::stats::{fit_line, RunningMoments};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Seed stream reserved for gradient statistics, away from trial indices.
const STATS_STREAM: u64 = u64::MAX;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `trial` of grid point `point`.
pub fn derive_seed(base: u64, point: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ point) ^ trial)
}

/// One row of `scaling.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRecord {
    pub n: usize,
    pub k: usize,
    pub dist: String,
    /// Mean crossing step over converged trials.
    #[serde(rename = "mean_T")]
    pub mean_t: f64,
    #[serde(rename = "std_T")]
    pub std_t: f64,
    pub n_trials: usize,
    pub n_failed: usize,
}

/// Result of one learning-time trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub result: std::result::Result<u64, String>,
}

/// Summarizes trials in trial-index order, whatever order they arrive in.
pub fn aggregate(n: usize, k: usize, dist: DistributionKind, outcomes: &[TrialOutcome]) -> ScalingRecord {
    let mut sorted: Vec<&TrialOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.trial);
    let acc: RunningMoments = sorted.iter().filter_map(|o| o.result.as_ref().ok()).map(|&t| t as f64).collect();
    let converged = acc.count() as usize;
    ScalingRecord {
        n,
        k,
        dist: dist.to_string(),
        mean_t: if converged > 0 { acc.mean() } else { f64::NAN },
        std_t: if converged > 1 { acc.std_dev() } else { f64::NAN },
        n_trials: outcomes.len(),
        n_failed: outcomes.len() - converged,
    }
}

/// First step at which the overlap reaches `config.target_overlap`.
pub fn measure_learning_time<R: Rng + ?Sized>(spec: &SourceSpec, config: &LearnConfig, rng: &mut R) -> Result<u64> {
    let t = run(spec, config, 0, rng)?;
    t.crossing.ok_or(Error::NotConverged { max_steps: config.max_steps })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalingModel {
    /// `T ~ N^alpha`.
    PurePower,
    /// `T ln(K)^p ~ N^alpha`.
    LogCorrected { p: f64 },
}

/// Least-squares fit of `ln T` (optionally log-corrected) against `ln N`.
/// Records without a finite positive mean are skipped.
pub fn fit_scaling(records: &[ScalingRecord], model: ScalingModel) -> Result<PowerLawFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.mean_t.is_finite() && r.mean_t > 0.0 && r.n > 0)
        .filter(|r| !matches!(model, ScalingModel::LogCorrected { .. }) || r.k > 1)
        .map(|r| {
            let corrected = match model {
                ScalingModel::PurePower => r.mean_t,
                ScalingModel::LogCorrected { p } => r.mean_t * (r.k as f64).ln().powf(p),
            };
            ((r.n as f64).ln(), corrected.ln())
        })
        .unzip();
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData { found: xs.len(), needed: MIN_FIT_POINTS });
    }
    let fit = fit_line(&xs, &ys).ok_or(Error::InsufficientData { found: xs.len(), needed: MIN_FIT_POINTS })?;
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min).exp().round();
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp().round();
    Ok(PowerLawFit {
        exponent: fit.slope,
        log_intercept: fit.intercept,
        r_squared: fit.r_squared,
        fit_range: (lo, hi),
        points: xs.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedTrial {
    pub point: usize,
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub dist: String,
    pub error: String,
}

/// A grid point with more failed trials than the configured fraction allows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvalidPoint {
    pub point: usize,
    pub n: usize,
    pub k: usize,
    pub dist: String,
    pub n_failed: usize,
    pub n_trials: usize,
}

/// Contents of `manifest.json`. Holds nothing run-specific beyond the
/// configuration, so identical runs produce identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub files: Vec<OutputFile>,
    pub failed_trials: Vec<FailedTrial>,
    pub invalid_points: Vec<InvalidPoint>,
}

impl Manifest {
    /// Whether any grid point failed too many trials.
    pub fn has_invalid_points(&self) -> bool {
        !self.invalid_points.is_empty()
    }
}

/// Runs the configured experiment and writes its CSV files plus
/// `manifest.json` into `config.out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Manifest> {
    config.validate()?;
    let mut manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        files: Vec::new(),
        failed_trials: Vec::new(),
        invalid_points: Vec::new(),
    };
    let out = config.out.as_path();
    match config.experiment {
        ExperimentKind::OverlapGeometry => overlap_geometry(config, out, &mut manifest)?,
        ExperimentKind::Gradstats => gradstats(config, out, &mut manifest)?,
        ExperimentKind::Landscape3d => landscape3d(config, out, &mut manifest)?,
        ExperimentKind::Trajectories => trajectories(config, out, &mut manifest)?,
        ExperimentKind::Scaling => scaling(config, out, &mut manifest)?,
    }
    let json = serde_json::to_vec_pretty(&manifest)?;
    atomic_write(out, MANIFEST_NAME, &json)?;
    Ok(manifest)
}

/// `stem.csv` for a single distribution, `stem_<dist>.csv` otherwise.
fn file_name(stem: &str, config: &ExperimentConfig, dist: DistributionKind) -> String {
    if config.dist.len() == 1 {
        format!("{stem}.csv")
    } else {
        let label: String = dist.to_string().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
        format!("{stem}_{label}.csv")
    }
}

fn overlap_geometry(config: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let points = config.points()?;
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, &(n, k))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, i as u64, 0));
            measured_max_overlap(n, k, config.trials, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let count = write_csv(out, "geometry.csv", &rows)?;
    manifest.files.push(OutputFile { name: "geometry.csv".into(), rows: count });
    Ok(())
}

fn stats_for(config: &ExperimentConfig, dist_index: usize, dist: DistributionKind) -> Result<GradientStats> {
    let grid = log_grid(config.grid_lo, config.grid_hi, config.grid_points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STATS_STREAM, dist_index as u64));
    gradient_stats(dist, config.threshold, &grid, config.samples, &mut rng)
}

fn gradstats(config: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<()> {
    for (i, &dist) in config.dist.iter().enumerate() {
        let stats = stats_for(config, i, dist)?;
        let name = file_name("gradstats", config, dist);
        let count = write_csv(out, &name, &stats.rows())?;
        manifest.files.push(OutputFile { name, rows: count });
    }
    Ok(())
}

fn landscape3d(config: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<()> {
    if config.n != [3] {
        return Err(Error::Config("landscape3d needs n = [3]".into()));
    }
    for (i, &dist) in config.dist.iter().enumerate() {
        let spec = make_source(3, 3, dist, 0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, i as u64, 0));
        let field = sphere_gradient_field(&spec, config.threshold, config.resolution, config.field_samples, &mut rng)?;
        let name = file_name("landscape3d", config, dist);
        let count = write_csv(out, &name, &field)?;
        manifest.files.push(OutputFile { name, rows: count });
    }
    Ok(())
}

fn learn_config(config: &ExperimentConfig, n: usize, stats: Option<&Arc<GradientStats>>) -> LearnConfig {
    let eta = match (config.schedule, stats) {
        (Schedule::Adaptive, Some(stats)) => {
            EtaSchedule::Adaptive { stats: stats.clone(), min: config.eta_min, max: config.eta_max }
        }
        _ => EtaSchedule::Fixed(config.eta.unwrap_or_else(|| default_fixed_eta(n))),
    };
    LearnConfig {
        eta,
        threshold: config.threshold,
        max_steps: config.max_steps,
        record_every: config.record_every,
        target_overlap: config.target_overlap,
        marks: Vec::new(),
        overrun: config.overrun,
    }
}

/// Fresh mixing directions and initial weights for every trial.
fn run_trial(config: &LearnConfig, n: usize, k: usize, dist: DistributionKind, seed: u64) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = make_source(n, k, dist, rng.random())?;
    run(&spec, config, seed, &mut rng)
}

struct Point {
    index: usize,
    n: usize,
    k: usize,
    dist: DistributionKind,
    config: LearnConfig,
}

/// Grid points in `(dist, (n, k))` order, each with its learning config.
fn learning_points(config: &ExperimentConfig) -> Result<Vec<Point>> {
    let pairs = config.points()?;
    let mut points = Vec::new();
    for (di, &dist) in config.dist.iter().enumerate() {
        let stats = match config.schedule {
            Schedule::Adaptive => Some(Arc::new(stats_for(config, di, dist)?)),
            Schedule::Fixed => None,
        };
        for &(n, k) in &pairs {
            let lc = learn_config(config, n, stats.as_ref());
            lc.validate()?;
            points.push(Point { index: points.len(), n, k, dist, config: lc });
        }
    }
    Ok(points)
}

/// Every `(point, trial)` pair, run in parallel and returned in index order.
fn run_trials(config: &ExperimentConfig, points: &[Point]) -> Vec<Vec<(u64, Result<Trajectory>)>> {
    let jobs: Vec<(usize, usize)> = points.iter().flat_map(|p| (0..config.trials).map(move |t| (p.index, t))).collect();
    let mut results: Vec<(u64, Result<Trajectory>)> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let point = &points[p];
            let seed = derive_seed(config.seed, p as u64, t as u64);
            (seed, run_trial(&point.config, point.n, point.k, point.dist, seed))
        })
        .collect();
    let mut grouped = Vec::with_capacity(points.len());
    for _ in points {
        let rest = results.split_off(config.trials);
        grouped.push(std::mem::replace(&mut results, rest));
    }
    grouped
}

fn outcome_of(trial: usize, seed: u64, max_steps: u64, result: &Result<Trajectory>) -> TrialOutcome {
    let result = match result {
        Ok(t) => t.crossing.ok_or_else(|| Error::NotConverged { max_steps }.to_string()),
        Err(e) => Err(e.to_string()),
    };
    TrialOutcome { trial, seed, result }
}

fn record_failures(config: &ExperimentConfig, point: &Point, outcomes: &[TrialOutcome], manifest: &mut Manifest) {
    let mut failed = 0;
    for o in outcomes {
        if let Err(error) = &o.result {
            failed += 1;
            manifest.failed_trials.push(FailedTrial {
                point: point.index,
                trial: o.trial,
                seed: o.seed,
                n: point.n,
                k: point.k,
                dist: point.dist.to_string(),
                error: error.clone(),
            });
        }
    }
    if failed as f64 > config.max_failed_fraction * outcomes.len() as f64 {
        manifest.invalid_points.push(InvalidPoint {
            point: point.index,
            n: point.n,
            k: point.k,
            dist: point.dist.to_string(),
            n_failed: failed,
            n_trials: outcomes.len(),
        });
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    trial: usize,
    n: usize,
    k: usize,
    step: u64,
    overlap: f64,
    eta: f64,
}

fn trajectories(config: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let points = learning_points(config)?;
    let results = run_trials(config, &points);
    for &dist in &config.dist {
        let mut rows = Vec::new();
        for (point, trials) in points.iter().zip(&results).filter(|(p, _)| p.dist == dist) {
            let outcomes: Vec<TrialOutcome> = trials
                .iter()
                .enumerate()
                .map(|(t, (seed, r))| outcome_of(t, *seed, point.config.max_steps, r))
                .collect();
            record_failures(config, point, &outcomes, manifest);
            for (trial, (_, result)) in trials.iter().enumerate() {
                if let Ok(traj) = result {
                    rows.extend(traj.samples.iter().map(|s| TrajectoryRow {
                        trial,
                        n: point.n,
                        k: point.k,
                        step: s.step,
                        overlap: s.overlap,
                        eta: s.eta,
                    }));
                }
            }
        }
        let name = file_name("trajectory", config, dist);
        let count = write_csv(out, &name, &rows)?;
        manifest.files.push(OutputFile { name, rows: count });
    }
    Ok(())
}

fn scaling(config: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let points = learning_points(config)?;
    let results = run_trials(config, &points);
    let mut records = Vec::with_capacity(points.len());
    for (point, trials) in points.iter().zip(&results) {
        let outcomes: Vec<TrialOutcome> =
            trials.iter().enumerate().map(|(t, (seed, r))| outcome_of(t, *seed, point.config.max_steps, r)).collect();
        record_failures(config, point, &outcomes, manifest);
        records.push(aggregate(point.n, point.k, point.dist, &outcomes));
    }
    let count = write_csv(out, "scaling.csv", &records)?;
    manifest.files.push(OutputFile { name: "scaling.csv".into(), rows: count });
    Ok(())
}

/// Reads `scaling.csv` rows back.
pub fn read_scaling_csv(path: &Path) -> Result<Vec<ScalingRecord>> {
    #[derive(serde::Deserialize)]
    struct Row {
        n: usize,
        k: usize,
        dist: String,
        #[serde(rename = "mean_T")]
        mean_t: f64,
        #[serde(rename = "std_T")]
        std_t: f64,
        n_trials: usize,
        n_failed: usize,
    }
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize::<Row>()
        .map(|r| {
            let r = r?;
            Ok(ScalingRecord {
                n: r.n,
                k: r.k,
                dist: r.dist,
                mean_t: r.mean_t,
                std_t: r.std_t,
                n_trials: r.n_trials,
                n_failed: r.n_failed,
            })
        })
        .collect()
}
