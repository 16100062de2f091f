//! Full N-dimensional online learning: `w <- normalize(w + eta x f(w . x))`.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::geometry::random_unit_vector;
use crate::reduced::{optimal_eta, rectifier, GradientStats, DEFAULT_THRESHOLD};
use crate::sources::{FeatureSet, Overlap, SourceSpec};
use crate::stats::RunningMoments;

/// Updates whose pre-normalization norm falls below this are redrawn.
pub const MIN_UPDATE_NORM: f64 = 1e-12;
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;
pub const DEFAULT_RECORD_EVERY: u64 = 100;
/// Consecutive degenerate updates tolerated before a step gives up.
const MAX_REDRAWS: u32 = 1000;

/// Pilot fixed rate `0.005 * 10 / n`.
pub fn default_fixed_eta(n: usize) -> f64 {
    0.05 / n as f64
}

/// Learning-rate schedule.
#[derive(Clone, Debug)]
pub enum EtaSchedule {
    Fixed(f64),
    /// `mu(d) / (n sigma^2(d) d)` at the current overlap, clipped to `[min, max]`.
    Adaptive {
        stats: Arc<GradientStats>,
        min: f64,
        max: f64,
    },
}

impl EtaSchedule {
    pub fn adaptive(stats: Arc<GradientStats>) -> Self {
        Self::Adaptive { stats, min: 0.0, max: f64::INFINITY }
    }
}

#[derive(Clone, Debug)]
pub struct LearnConfig {
    pub eta: EtaSchedule,
    pub threshold: f64,
    pub max_steps: u64,
    pub record_every: u64,
    /// Run until the overlap reaches this value.
    pub target_overlap: f64,
    /// Extra overlaps whose first crossing is recorded exactly.
    pub marks: Vec<f64>,
    /// After reaching the target, keep going for this fraction of the
    /// crossing step (used to look past the crossing).
    pub overrun: f64,
}

impl LearnConfig {
    pub fn fixed(eta: f64, target_overlap: f64) -> Self {
        Self {
            eta: EtaSchedule::Fixed(eta),
            threshold: DEFAULT_THRESHOLD,
            max_steps: DEFAULT_MAX_STEPS,
            record_every: DEFAULT_RECORD_EVERY,
            target_overlap,
            marks: Vec::new(),
            overrun: 0.0,
        }
    }

    pub fn adaptive(stats: Arc<GradientStats>, target_overlap: f64) -> Self {
        Self { eta: EtaSchedule::adaptive(stats), ..Self::fixed(1.0, target_overlap) }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.eta {
            EtaSchedule::Fixed(eta) if !(*eta >= 0.0 && eta.is_finite()) => {
                return Err(invalid("fixed learning rate must be finite and non-negative"))
            }
            EtaSchedule::Adaptive { min, max, .. } if !(*min >= 0.0 && min <= max) => {
                return Err(invalid("adaptive rate bounds need 0 <= min <= max"))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.target_overlap) {
            return Err(invalid("target overlap must lie in [0, 1)"));
        }
        if self.max_steps == 0 || self.record_every == 0 {
            return Err(invalid("max_steps and record_every must be positive"));
        }
        if !(self.overrun >= 0.0 && self.overrun.is_finite()) {
            return Err(invalid("overrun must be finite and non-negative"));
        }
        if self.marks.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(invalid("marks must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Unit weight vector and its overlap with the ground-truth features.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightState {
    pub w: DVector<f64>,
    pub step: u64,
    pub overlap: Overlap,
    /// Updates redrawn because the unnormalized weights collapsed.
    pub redraws: u64,
}

impl WeightState {
    pub fn new(w: DVector<f64>, features: &FeatureSet) -> Self {
        let overlap = features.overlap(w.as_slice());
        Self { w, step: 0, overlap, redraws: 0 }
    }

    /// `max_i |w . f_i|`.
    pub fn overlap_value(&self) -> f64 {
        self.overlap.value
    }

    pub fn best_feature(&self) -> usize {
        self.overlap.feature
    }
}

pub fn init_weights<R: Rng + ?Sized>(spec: &SourceSpec, rng: &mut R) -> Result<WeightState> {
    let w = random_unit_vector(spec.n_inputs(), rng)?;
    Ok(WeightState::new(w, &spec.feature_set()))
}

/// Optimal rate at overlap `d`, clipped to `[min, max]`. Overlaps below the
/// statistics grid use its lowest point.
pub fn adaptive_eta(d: f64, stats: &GradientStats, n: usize, min: f64, max: f64) -> f64 {
    let d = d.max(stats.grid[0]);
    let (mu, sigma) = stats.interpolate(d);
    optimal_eta(mu, sigma * sigma, n, d).clamp(min, max)
}

/// Learning rate for the current state.
///
/// For symmetric latents the schedule uses `max |w . f_i|`. For skewed
/// latents only the positive orientation of a feature is an attractor of the
/// one-sided rectifier, so the schedule uses `max w . f_i` instead.
pub fn current_eta(state: &WeightState, spec: &SourceSpec, config: &LearnConfig) -> f64 {
    match &config.eta {
        EtaSchedule::Fixed(eta) => *eta,
        EtaSchedule::Adaptive { stats, min, max } => {
            let d = if spec.kind().is_symmetric() { state.overlap.value } else { state.overlap.max_positive };
            adaptive_eta(d, stats, spec.n_inputs(), *min, *max)
        }
    }
}

/// Scratch space for [`step_with`].
pub struct StepBuffer {
    x: Vec<f64>,
}

impl StepBuffer {
    pub fn new(n: usize) -> Self {
        Self { x: vec![0.0; n] }
    }
}

/// What a single update did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub eta: f64,
    /// False when `f(u) = 0` or `eta = 0` left the weights untouched.
    pub moved: bool,
}

/// One online update. The overlap is refreshed whenever the weights move,
/// so it is exact after every step.
pub fn step_with<R: Rng + ?Sized>(
    state: &mut WeightState,
    spec: &SourceSpec,
    features: &FeatureSet,
    config: &LearnConfig,
    buffer: &mut StepBuffer,
    rng: &mut R,
) -> Result<StepOutcome> {
    let eta = current_eta(state, spec, config);
    let mut redraws = 0;
    loop {
        spec.draw_into(rng, &mut buffer.x);
        let u: f64 = state.w.iter().zip(&buffer.x).map(|(a, b)| a * b).sum();
        let f = rectifier(u, config.threshold);
        if f == 0.0 || eta == 0.0 {
            state.step += 1;
            return Ok(StepOutcome { eta, moved: false });
        }
        let scale = eta * f;
        let norm_sq: f64 = state.w.iter().zip(&buffer.x).map(|(w, x)| (w + scale * x).powi(2)).sum();
        if norm_sq.sqrt() < MIN_UPDATE_NORM {
            state.redraws += 1;
            redraws += 1;
            if redraws >= MAX_REDRAWS {
                return Err(invalid("weight update keeps collapsing to zero"));
            }
            continue;
        }
        let inv = 1.0 / norm_sq.sqrt();
        for (w, x) in state.w.iter_mut().zip(&buffer.x) {
            *w = (*w + scale * x) * inv;
        }
        state.step += 1;
        state.overlap = features.overlap(state.w.as_slice());
        return Ok(StepOutcome { eta, moved: true });
    }
}

pub fn step<R: Rng + ?Sized>(
    state: &mut WeightState,
    spec: &SourceSpec,
    config: &LearnConfig,
    rng: &mut R,
) -> Result<StepOutcome> {
    let features = spec.feature_set();
    step_with(state, spec, &features, config, &mut StepBuffer::new(spec.n_inputs()), rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub step: u64,
    pub overlap: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub trial_seed: u64,
    pub n: usize,
    pub k: usize,
    /// Strictly increasing in `step`.
    pub samples: Vec<TrajectorySample>,
    pub target_overlap: f64,
    /// First step at which the overlap reached the target.
    pub crossing: Option<u64>,
    /// Exact first crossings of each configured mark.
    pub mark_crossings: Vec<(f64, Option<u64>)>,
    pub converged: bool,
    pub redraws: u64,
    pub final_feature: usize,
    /// Sign of `w . f` for the best feature at the end of the run.
    pub final_sign: f64,
}

impl Trajectory {
    pub fn not_converged(&self) -> bool {
        !self.converged
    }

    /// First step with overlap `>= d_ref`: exact for the target and the
    /// configured marks, otherwise the first recorded sample.
    pub fn crossing_step(&self, d_ref: f64) -> Option<u64> {
        if d_ref == self.target_overlap {
            return self.crossing;
        }
        if let Some((_, c)) = self.mark_crossings.iter().find(|(m, _)| *m == d_ref) {
            return *c;
        }
        self.samples.iter().find(|s| s.overlap >= d_ref).map(|s| s.step)
    }

    /// Overlap at `step`, by linear interpolation between records.
    pub fn overlap_at(&self, step: f64) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() || step < s[0].step as f64 || step > s[s.len() - 1].step as f64 {
            return None;
        }
        let i = s.partition_point(|p| (p.step as f64) <= step);
        if i == s.len() {
            return Some(s[s.len() - 1].overlap);
        }
        let (a, b) = (&s[i - 1], &s[i]);
        let t = (step - a.step as f64) / (b.step - a.step) as f64;
        Some(a.overlap + t * (b.overlap - a.overlap))
    }
}

/// Runs online learning from `state` until the target overlap (plus the
/// configured overrun) or `max_steps`.
pub fn run_from<R: Rng + ?Sized>(
    spec: &SourceSpec,
    mut state: WeightState,
    config: &LearnConfig,
    trial_seed: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    config.validate()?;
    if state.w.len() != spec.n_inputs() {
        return Err(invalid("weight dimension does not match the source"));
    }
    let features = spec.feature_set();
    let mut buffer = StepBuffer::new(spec.n_inputs());
    let mut samples = Vec::new();
    let mut marks: Vec<(f64, Option<u64>)> = config.marks.iter().map(|&m| (m, None)).collect();
    let mut crossing = None;
    let mut stop_at = None;

    let record = |samples: &mut Vec<TrajectorySample>, state: &WeightState, eta: f64| {
        if samples.last().is_none_or(|s: &TrajectorySample| s.step < state.step) {
            samples.push(TrajectorySample { step: state.step, overlap: state.overlap.value, eta });
        }
    };

    loop {
        let d = state.overlap.value;
        let mut crossed = false;
        for (m, c) in marks.iter_mut() {
            if c.is_none() && d >= *m {
                *c = Some(state.step);
                crossed = true;
            }
        }
        if crossing.is_none() && d >= config.target_overlap {
            crossing = Some(state.step);
            crossed = true;
            let extra = (config.overrun * state.step as f64).ceil() as u64;
            stop_at = Some(state.step.saturating_add(extra));
        }
        let eta_now = current_eta(&state, spec, config);
        if crossed || state.step.is_multiple_of(config.record_every) {
            record(&mut samples, &state, eta_now);
        }
        if stop_at.is_some_and(|s| state.step >= s) || state.step >= config.max_steps {
            record(&mut samples, &state, eta_now);
            break;
        }
        step_with(&mut state, spec, &features, config, &mut buffer, rng)?;
    }

    let final_sign = if state.overlap.signed >= 0.0 { 1.0 } else { -1.0 };
    Ok(Trajectory {
        trial_seed,
        n: spec.n_inputs(),
        k: spec.n_features(),
        samples,
        target_overlap: config.target_overlap,
        crossing,
        mark_crossings: marks,
        converged: crossing.is_some(),
        redraws: state.redraws,
        final_feature: state.overlap.feature,
        final_sign,
    })
}

/// Random initial weights, then [`run_from`].
pub fn run<R: Rng + ?Sized>(
    spec: &SourceSpec,
    config: &LearnConfig,
    trial_seed: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    let state = init_weights(spec, rng)?;
    run_from(spec, state, config, trial_seed, rng)
}

/// Sample excess kurtosis of the projection `u = w . x`.
pub fn projected_input_normality<R: Rng + ?Sized>(
    spec: &SourceSpec,
    w: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(crate::error::Error::NonUnitWeight { norm });
    }
    if w.len() != spec.n_inputs() || n_samples < 2 {
        return Err(invalid("need matching dimensions and at least two samples"));
    }
    let mut x = vec![0.0; spec.n_inputs()];
    let acc: RunningMoments = (0..n_samples)
        .map(|_| {
            spec.draw_into(rng, &mut x);
            w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    Ok(acc.excess_kurtosis())
}
