use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduced::{
    DEFAULT_GRID_HI, DEFAULT_GRID_LO, DEFAULT_GRID_POINTS, DEFAULT_SAMPLES, DEFAULT_TARGET_OVERLAP, DEFAULT_THRESHOLD,
};
use crate::sources::DistributionKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    OverlapGeometry,
    Trajectories,
    Gradstats,
    Landscape3d,
    Scaling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Optimal rate from precomputed gradient statistics.
    Adaptive,
    /// Constant rate `eta` (default `0.005 * 10 / n`).
    Fixed,
}

/// Everything an experiment needs. Loaded from TOML; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Input dimensions.
    pub n: Vec<usize>,
    /// Feature counts; empty means `K = N` at every point.
    pub k: Vec<usize>,
    pub dist: Vec<DistributionKind>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,

    pub threshold: f64,
    pub schedule: Schedule,
    pub eta: Option<f64>,
    pub eta_min: f64,
    pub eta_max: f64,
    pub target_overlap: f64,
    pub max_steps: u64,
    pub record_every: u64,
    /// Fraction of the crossing step to keep running after the target.
    pub overrun: f64,
    /// Largest fraction of failed trials before a point is marked invalid.
    pub max_failed_fraction: f64,

    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    /// Samples per gradient-statistics grid point.
    pub samples: usize,

    /// Polar resolution of the sphere field.
    pub resolution: usize,
    pub field_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Scaling,
            n: vec![10, 20, 40, 80, 160],
            k: Vec::new(),
            dist: vec![DistributionKind::chi_square()],
            trials: 20,
            seed: 0,
            out: PathBuf::from("out"),
            threshold: DEFAULT_THRESHOLD,
            schedule: Schedule::Adaptive,
            eta: None,
            eta_min: 0.0,
            eta_max: f64::MAX,
            target_overlap: DEFAULT_TARGET_OVERLAP,
            max_steps: 10_000_000,
            record_every: 100,
            overrun: 0.0,
            max_failed_fraction: 0.05,
            grid_lo: DEFAULT_GRID_LO,
            grid_hi: DEFAULT_GRID_HI,
            grid_points: DEFAULT_GRID_POINTS,
            samples: DEFAULT_SAMPLES,
            resolution: 128,
            field_samples: 100_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// `(n, k)` pairs, in order.
    pub fn points(&self) -> Result<Vec<(usize, usize)>> {
        if self.k.is_empty() {
            return Ok(self.n.iter().map(|&n| (n, n)).collect());
        }
        if self.k.len() == self.n.len() {
            return Ok(self.n.iter().copied().zip(self.k.iter().copied()).collect());
        }
        if self.n.len() == 1 {
            return Ok(self.k.iter().map(|&k| (self.n[0], k)).collect());
        }
        if self.k.len() == 1 {
            return Ok(self.n.iter().map(|&n| (n, self.k[0])).collect());
        }
        Err(Error::Config("n and k lists must have equal length, or one of them a single entry".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.n.is_empty() || self.n.contains(&0) || self.k.contains(&0) {
            return bad("n must be a non-empty list of positive integers, k entries positive");
        }
        if self.dist.is_empty() {
            return bad("dist must list at least one distribution");
        }
        if self.trials == 0 || self.max_steps == 0 || self.record_every == 0 {
            return bad("trials, max_steps and record_every must be positive");
        }
        if !(0.0..1.0).contains(&self.target_overlap) {
            return bad("target_overlap must lie in [0, 1)");
        }
        if self.eta.is_some_and(|e| !(e >= 0.0 && e.is_finite())) {
            return bad("eta must be finite and non-negative");
        }
        if !(self.eta_min >= 0.0 && self.eta_min <= self.eta_max) {
            return bad("need 0 <= eta_min <= eta_max");
        }
        if !(0.0..=1.0).contains(&self.max_failed_fraction) || !(self.overrun >= 0.0) {
            return bad("max_failed_fraction must lie in [0, 1] and overrun be non-negative");
        }
        if !(self.grid_lo > 0.0 && self.grid_lo < self.grid_hi && self.grid_hi < 1.0) || self.grid_points < 2 {
            return bad("gradient grid needs 0 < grid_lo < grid_hi < 1 and at least two points");
        }
        if self.samples < 10 || self.field_samples < 20 || self.resolution < 2 {
            return bad("samples >= 10, field_samples >= 20 and resolution >= 2 required");
        }
        if !self.threshold.is_finite() {
            return bad("threshold must be finite");
        }
        self.points()?;
        Ok(())
    }
}
