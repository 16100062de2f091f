//! One-dimensional reduction of the learning dynamics.
//!
//! Along the path from a random initial weight vector to its closest feature,
//! the projected input is `u = d l + sqrt(1 - d^2) g` with `l` the latent and
//! `g` standard normal, so every quantity of interest depends on the overlap
//! `d` alone. This module estimates the gradient statistics `mu(d)`,
//! `sigma(d)`, fits their power laws, and integrates the optimal-rate
//! dynamics into learning-time predictions.
//!
//! Objective and nonlinearity are fixed to `F(u) = (u - theta)_+^2 / 2` and
//! `f(u) = F'(u) = (u - theta)_+`.

use nalgebra::{Matrix5, Vector5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::sources::DistributionKind;
use crate::stats::{fit_line, normal_cdf, normal_pdf, RunningMoments};

pub const DEFAULT_THRESHOLD: f64 = 2.0;
/// Largest overlap at which the pathwise derivative is still defined.
pub const MAX_OVERLAP: f64 = 1.0 - 1e-6;
pub const DEFAULT_GRID_LO: f64 = 0.01;
pub const DEFAULT_GRID_HI: f64 = 0.9;
pub const DEFAULT_GRID_POINTS: usize = 40;
pub const DEFAULT_SAMPLES: usize = 1_000_000;
/// Overlap at which learning counts as done.
pub const DEFAULT_TARGET_OVERLAP: f64 = 0.7;

pub fn rectifier(u: f64, threshold: f64) -> f64 {
    (u - threshold).max(0.0)
}

pub fn objective(u: f64, threshold: f64) -> f64 {
    let r = rectifier(u, threshold);
    0.5 * r * r
}

fn check_overlap(d: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&d) {
        return Err(invalid(format!("overlap must lie in [0, 1], got {d}")));
    }
    Ok(())
}

fn check_open_overlap(d: f64) -> Result<()> {
    if !(d > 0.0 && d <= MAX_OVERLAP) {
        return Err(invalid(format!("overlap must lie in (0, 1 - 1e-6], got {d}")));
    }
    Ok(())
}

/// Projected input for one latent draw `l` and Gaussian draw `g`.
pub fn mix(d: f64, l: f64, g: f64) -> f64 {
    d * l + (1.0 - d * d).max(0.0).sqrt() * g
}

pub fn sample_u<R: Rng + ?Sized>(d: f64, kind: DistributionKind, n_samples: usize, rng: &mut R) -> Result<Vec<f64>> {
    check_overlap(d)?;
    Ok((0..n_samples)
        .map(|_| {
            let l = kind.sample(rng);
            let g: f64 = rng.sample(StandardNormal);
            mix(d, l, g)
        })
        .collect())
}

/// Pathwise derivative `dF(u)/dd = f(u) (l - d g / sqrt(1 - d^2))` for fixed draws.
pub fn pathwise_gradient(d: f64, l: f64, g: f64, threshold: f64) -> f64 {
    let s = (1.0 - d * d).sqrt();
    rectifier(d * l + s * g, threshold) * (l - d * g / s)
}

pub fn reduced_gradient_sample<R: Rng + ?Sized>(
    d: f64,
    kind: DistributionKind,
    threshold: f64,
    rng: &mut R,
) -> Result<f64> {
    check_open_overlap(d)?;
    let l = kind.sample(rng);
    let g: f64 = rng.sample(StandardNormal);
    Ok(pathwise_gradient(d, l, g, threshold))
}

/// `E_g[dF(u)/dd | l]`, the pathwise derivative with the Gaussian part
/// integrated out in closed form.
///
/// With `m = d l - theta` and `s = sqrt(1 - d^2)`,
/// `E_g[F] = ((m^2 + s^2) Phi(m/s) + m s phi(m/s)) / 2`, whose `d`-derivative
/// is `l (m Phi(m/s) + s phi(m/s)) - d Phi(m/s)`.
pub fn conditional_gradient(d: f64, l: f64, threshold: f64) -> f64 {
    let s = (1.0 - d * d).sqrt();
    let m = d * l - threshold;
    let z = m / s;
    let cdf = normal_cdf(z);
    l * (m * cdf + s * normal_pdf(z)) - d * cdf
}

/// `E_g[(dF(u)/dd)^2 | l]`. The squared pathwise derivative is a quartic in
/// `g` on `g > -m/s`, integrated with truncated normal moments.
pub fn conditional_gradient_square(d: f64, l: f64, threshold: f64) -> f64 {
    let s = (1.0 - d * d).sqrt();
    let m = d * l - threshold;
    let c = -m / s;
    // (m + s g)(l - d g / s) = p0 + p1 g + p2 g^2
    let (p0, p1, p2) = (m * l, s * l - m * d / s, -d);
    let phi = normal_pdf(c);
    let mut mom = [0.0; 5];
    mom[0] = normal_cdf(m / s);
    mom[1] = phi;
    for k in 2..5 {
        mom[k] = c.powi(k as i32 - 1) * phi + (k - 1) as f64 * mom[k - 2];
    }
    p0 * p0 * mom[0]
        + 2.0 * p0 * p1 * mom[1]
        + (p1 * p1 + 2.0 * p0 * p2) * mom[2]
        + 2.0 * p1 * p2 * mom[3]
        + p2 * p2 * mom[4]
}

/// `E_g[F(u) | l]`.
pub fn conditional_objective(d: f64, l: f64, threshold: f64) -> f64 {
    let s = (1.0 - d * d).sqrt();
    let m = d * l - threshold;
    let z = m / s;
    0.5 * ((m * m + s * s) * normal_cdf(z) + m * s * normal_pdf(z))
}

/// Log-spaced overlap grid.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi < 1.0 && lo < hi) || points < 2 {
        return Err(invalid("grid needs 0 < lo < hi < 1 and at least two points"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect())
}

pub fn default_grid() -> Vec<f64> {
    log_grid(DEFAULT_GRID_LO, DEFAULT_GRID_HI, DEFAULT_GRID_POINTS).unwrap()
}

/// Gradient statistics over a grid of overlaps.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientStats {
    pub kind: DistributionKind,
    pub threshold: f64,
    pub grid: Vec<f64>,
    /// `mu(d) = dF^/dd`.
    pub mu: Vec<f64>,
    pub mu_se: Vec<f64>,
    /// Standard deviation of single-sample pathwise gradients.
    pub sigma: Vec<f64>,
    /// `mu^2 / sigma^2`.
    pub snr: Vec<f64>,
    pub n_samples: usize,
}

/// One row of `gradstats.csv`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GradientStatsRow {
    pub d: f64,
    pub mu: f64,
    pub mu_se: f64,
    pub sigma: f64,
    pub snr: f64,
    pub n_samples: usize,
}

/// Estimate at one overlap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointEstimate {
    pub mu: f64,
    pub mu_se: f64,
    pub sigma: f64,
    /// Mean of the raw pathwise samples, without variance reduction.
    pub raw_mu: f64,
    pub raw_mu_se: f64,
    /// `E[g^2]` of the raw pathwise samples.
    pub second_moment: f64,
}

/// Controls `l^k - E[l^k]`, `k = 1..4`, all with known zero mean.
fn controls(l: f64, moments: &[f64; 4]) -> [f64; 4] {
    let l2 = l * l;
    [l - moments[0], l2 - moments[1], l2 * l - moments[2], l2 * l2 - moments[3]]
}

fn design_row(l: f64, moments: &[f64; 4]) -> Vector5<f64> {
    let c = controls(l, moments);
    Vector5::new(1.0, c[0], c[1], c[2], c[3])
}

/// Estimates `mu(d)` and `sigma(d)` from `n_samples` draws seeded by `seed`.
///
/// `sigma` and the raw mean come straight from the pathwise samples. `mu` is
/// the intercept of a least-squares regression of the conditional gradient
/// `E[dF/dd | l]` on the zero-mean controls `l^k - E[l^k]`: an unbiased
/// (up to `O(1/n)`) control-variate estimate whose error shrinks like the
/// part of the conditional gradient that is not polynomial in `l`. This is
/// what resolves the `d^3` signal at small overlaps.
pub fn estimate_point(
    d: f64,
    kind: DistributionKind,
    threshold: f64,
    n_samples: usize,
    seed: u64,
) -> Result<PointEstimate> {
    check_open_overlap(d)?;
    if n_samples < 10 {
        return Err(invalid("need at least 10 samples per grid point"));
    }
    let moments = [kind.raw_moment(1), kind.raw_moment(2), kind.raw_moment(3), kind.raw_moment(4)];

    let mut raw = RunningMoments::new();
    let mut raw_sq = 0.0;
    let mut xtx = Matrix5::<f64>::zeros();
    let mut xty = Vector5::<f64>::zeros();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_samples {
        let l = kind.sample(&mut rng);
        let g: f64 = rng.sample(StandardNormal);
        let sample = pathwise_gradient(d, l, g, threshold);
        raw.push(sample);
        raw_sq += sample * sample;
        let y = conditional_gradient(d, l, threshold);
        let x = design_row(l, &moments);
        xtx.syger(1.0, &x, &x, 1.0);
        xty.axpy(y, &x, 1.0);
    }
    xtx.fill_upper_triangle_with_lower_triangle();

    let n = n_samples as f64;
    let (mu, mu_se) = match xtx.cholesky() {
        Some(chol) => {
            let beta = chol.solve(&xty);
            let inv00 = chol.inverse()[(0, 0)];
            // Second pass over the same stream for the residual variance.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rss = 0.0;
            for _ in 0..n_samples {
                let l = kind.sample(&mut rng);
                let _g: f64 = rng.sample(StandardNormal);
                let r = conditional_gradient(d, l, threshold) - design_row(l, &moments).dot(&beta);
                rss += r * r;
            }
            let s2 = rss / (n - 5.0);
            (beta[0], (s2 * inv00).max(0.0).sqrt())
        }
        // Degenerate controls (e.g. a Gaussian latent, where l^2 and l^4 are
        // nearly collinear at tiny n): fall back to the raw mean.
        None => (raw.mean(), raw.std_error()),
    };

    Ok(PointEstimate {
        mu,
        mu_se,
        sigma: raw.std_dev(),
        raw_mu: raw.mean(),
        raw_mu_se: raw.std_error(),
        second_moment: raw_sq / n,
    })
}

/// Gradient statistics on `grid`; each point draws from its own stream
/// seeded from `rng`, so points can run in parallel deterministically.
pub fn gradient_stats<R: Rng + ?Sized>(
    kind: DistributionKind,
    threshold: f64,
    grid: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<GradientStats> {
    if grid.is_empty() {
        return Err(invalid("grid must not be empty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("grid must be strictly increasing"));
    }
    for &d in grid {
        check_open_overlap(d)?;
        if d >= 1.0 {
            return Err(invalid("grid points must be below 1"));
        }
    }
    let seeds: Vec<u64> = grid.iter().map(|_| rng.random()).collect();
    let points: Vec<PointEstimate> = grid
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(&d, &seed)| estimate_point(d, kind, threshold, n_samples, seed))
        .collect::<Result<_>>()?;

    let mu: Vec<f64> = points.iter().map(|p| p.mu).collect();
    let sigma: Vec<f64> = points.iter().map(|p| p.sigma).collect();
    let snr = mu.iter().zip(&sigma).map(|(m, s)| m * m / (s * s)).collect();
    Ok(GradientStats {
        kind,
        threshold,
        grid: grid.to_vec(),
        mu,
        mu_se: points.iter().map(|p| p.mu_se).collect(),
        sigma,
        snr,
        n_samples,
    })
}

impl GradientStats {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn rows(&self) -> Vec<GradientStatsRow> {
        (0..self.len())
            .map(|i| GradientStatsRow {
                d: self.grid[i],
                mu: self.mu[i],
                mu_se: self.mu_se[i],
                sigma: self.sigma[i],
                snr: self.snr[i],
                n_samples: self.n_samples,
            })
            .collect()
    }

    pub fn is_significant(&self, i: usize) -> bool {
        self.mu[i] > 3.0 * self.mu_se[i]
    }

    /// Log-linear interpolation of `(mu, sigma)` at `d`. Overlaps below the
    /// grid use the lowest grid point and overlaps above it the highest; no
    /// extrapolation.
    pub fn interpolate(&self, d: f64) -> (f64, f64) {
        let g = &self.grid;
        if d <= g[0] {
            return (self.mu[0], self.sigma[0]);
        }
        let last = g.len() - 1;
        if d >= g[last] {
            return (self.mu[last], self.sigma[last]);
        }
        let i = g.partition_point(|&x| x <= d) - 1;
        let t = (d.ln() - g[i].ln()) / (g[i + 1].ln() - g[i].ln());
        let lerp_log = |a: f64, b: f64| {
            if a > 0.0 && b > 0.0 {
                (a.ln() + t * (b.ln() - a.ln())).exp()
            } else {
                a + t * (b - a)
            }
        };
        (lerp_log(self.mu[i], self.mu[i + 1]), lerp_log(self.sigma[i], self.sigma[i + 1]))
    }

    pub fn grid_range(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }
}

/// Least-squares power law `y = exp(log_intercept) x^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub log_intercept: f64,
    pub r_squared: f64,
    pub fit_range: (f64, f64),
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 4;

/// Fits `y ~ x^a` on the positive points with `x` inside `range`.
pub fn fit_power_law_points(xs: &[f64], ys: &[f64], range: (f64, f64)) -> Result<PowerLawFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x >= range.0 && x <= range.1 && x > 0.0 && y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    if lx.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientSignal { found: lx.len(), needed: MIN_FIT_POINTS });
    }
    let fit = fit_line(&lx, &ly).ok_or(Error::InsufficientSignal { found: lx.len(), needed: MIN_FIT_POINTS })?;
    Ok(PowerLawFit {
        exponent: fit.slope,
        log_intercept: fit.intercept,
        r_squared: fit.r_squared,
        fit_range: range,
        points: lx.len(),
    })
}

/// Power-law fit of `mu(d)` over the grid points in `fit_range` whose mean
/// is at least three standard errors above zero.
pub fn fit_power_law(stats: &GradientStats, fit_range: (f64, f64)) -> Result<PowerLawFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        (0..stats.len()).filter(|&i| stats.is_significant(i)).map(|i| (stats.grid[i], stats.mu[i])).unzip();
    fit_power_law_points(&xs, &ys, fit_range)
}

/// Learning rate maximizing the expected overlap gain
/// `eta mu - eta^2 n sigma^2 d / 2`, i.e. `mu / (n sigma^2 d)`.
pub fn optimal_eta(mu: f64, sigma2: f64, n: usize, d: f64) -> f64 {
    mu / (n as f64 * sigma2 * d)
}

/// Expected overlap change for one normalized update at rate `eta`.
pub fn expected_gain(eta: f64, mu: f64, sigma2: f64, n: usize, d: f64) -> f64 {
    eta * mu - 0.5 * eta * eta * n as f64 * sigma2 * d
}

/// Expected gain at the optimal rate, `mu^2 / (2 n sigma^2 d)`.
pub fn optimal_gain(mu: f64, sigma2: f64, n: usize, d: f64) -> f64 {
    mu * mu / (2.0 * n as f64 * sigma2 * d)
}

const QUADRATURE_NODES: usize = 512;

/// Steps needed to go from `d0` to `d_target` at the optimal rate:
/// `T = int 1 / gain(d) dd = int 2 n d sigma^2 / mu^2 dd`, trapezoid on a
/// log-spaced mesh with log-linear interpolation of the statistics.
pub fn predict_learning_time(stats: &GradientStats, n: usize, d0: f64, d_target: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if d0 > d_target {
        return Err(invalid(format!("start overlap {d0} exceeds target {d_target}")));
    }
    let (lo, hi) = stats.grid_range();
    for d in [d0, d_target] {
        if !(d >= lo && d <= hi) {
            return Err(Error::OutOfGrid { d, lo, hi });
        }
    }
    if d0 == d_target {
        return Ok(0.0);
    }
    // Every grid point touching [d0, d_target] must carry a resolved gradient.
    let first = stats.grid.partition_point(|&x| x <= d0).saturating_sub(1);
    let last = stats.grid.partition_point(|&x| x < d_target).min(stats.len() - 1);
    for i in first..=last {
        if !stats.is_significant(i) {
            return Err(Error::ZeroGradient { d: stats.grid[i] });
        }
    }
    let (a, b) = (d0.ln(), d_target.ln());
    let h = (b - a) / (QUADRATURE_NODES - 1) as f64;
    let integrand = |t: f64| {
        let d = t.exp();
        let (mu, sigma) = stats.interpolate(d);
        // dd = d dt on the log mesh.
        d / optimal_gain(mu, sigma * sigma, n, d)
    };
    let mut total = 0.5 * (integrand(a) + integrand(b));
    for i in 1..QUADRATURE_NODES - 1 {
        total += integrand(a + h * i as f64);
    }
    Ok(total * h)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedRunOptions {
    /// Sample per-step gradient noise; when off the mean recurrence is iterated.
    pub noise: bool,
    pub max_steps: u64,
    pub record_every: u64,
}

impl Default for ReducedRunOptions {
    fn default() -> Self {
        Self { noise: true, max_steps: 100_000_000, record_every: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReducedSample {
    pub step: u64,
    pub overlap: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedTrajectory {
    pub samples: Vec<ReducedSample>,
    pub steps: u64,
    pub converged: bool,
}

/// Iterates `d <- d + eta mu - eta^2 n sigma^2 d / 2` at the optimal rate
/// for the current overlap.
///
/// With noise on, `mu` and `sigma^2` are replaced by a single pathwise
/// gradient sample `g` and its square `g^2`, so the recurrence has the same
/// per-step fluctuations as a single-sample update.
#[allow(clippy::too_many_arguments)]
pub fn reduced_run<R: Rng + ?Sized>(
    kind: DistributionKind,
    threshold: f64,
    n: usize,
    d0: f64,
    d_target: f64,
    stats: &GradientStats,
    rng: &mut R,
    options: ReducedRunOptions,
) -> Result<ReducedTrajectory> {
    if !(d0 > 0.0 && d0 <= d_target && d_target < 1.0) {
        return Err(invalid("need 0 < d0 <= d_target < 1"));
    }
    if n == 0 || options.record_every == 0 {
        return Err(invalid("n and record_every must be positive"));
    }
    let mut d = d0;
    let mut step = 0u64;
    let mut samples = Vec::new();
    let eta_at = |d: f64| {
        let (mu, sigma) = stats.interpolate(d);
        optimal_eta(mu, sigma * sigma, n, d.max(stats.grid[0])).max(0.0)
    };
    while d < d_target && step < options.max_steps {
        let eta = eta_at(d);
        if step.is_multiple_of(options.record_every) {
            samples.push(ReducedSample { step, overlap: d, eta });
        }
        let delta = if options.noise {
            let g = pathwise_gradient(d, kind.sample(rng), rng.sample(StandardNormal), threshold);
            eta * g - 0.5 * eta * eta * n as f64 * g * g * d
        } else {
            let (mu, sigma) = stats.interpolate(d);
            expected_gain(eta, mu, sigma * sigma, n, d)
        };
        d = (d + delta).abs().clamp(1e-9, MAX_OVERLAP);
        step += 1;
    }
    let converged = d >= d_target;
    samples.push(ReducedSample { step, overlap: d, eta: eta_at(d) });
    Ok(ReducedTrajectory { samples, steps: step, converged })
}

/// Estimated overlap gain of one update at each rate in `etas`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainMeasurement {
    pub etas: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// `paired_se[i][j]`: standard error of `mean[i] - mean[j]` under common
    /// random numbers.
    pub paired_se: Vec<Vec<f64>>,
}

/// Measures `<Delta d>` for single updates at overlap `d`, one sample per
/// draw of `(l, g)` shared across all rates.
///
/// Each per-update increment is `eta y - eta^2 n q d / 2`, where `y` and `q`
/// are the conditional expectations given `l` of the pathwise gradient and
/// of its square, each adjusted with control variates. Both keep the mean of
/// the raw sample and have much smaller variance.
pub fn measure_gain<R: Rng + ?Sized>(
    kind: DistributionKind,
    threshold: f64,
    n: usize,
    d: f64,
    etas: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Result<GainMeasurement> {
    check_open_overlap(d)?;
    if etas.is_empty() || n_samples < 10 {
        return Err(invalid("need at least one rate and ten samples"));
    }
    let seed: u64 = rng.random();
    let moments = [kind.raw_moment(1), kind.raw_moment(2), kind.raw_moment(3), kind.raw_moment(4)];

    // Pass 1: control coefficients.
    let mut xtx = Matrix5::<f64>::zeros();
    let mut xty = Vector5::<f64>::zeros();
    let mut xtq = Vector5::<f64>::zeros();
    let mut stream = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_samples {
        let l = kind.sample(&mut stream);
        let _g: f64 = stream.sample(StandardNormal);
        let x = design_row(l, &moments);
        xtx.syger(1.0, &x, &x, 1.0);
        xty.axpy(conditional_gradient(d, l, threshold), &x, 1.0);
        xtq.axpy(conditional_gradient_square(d, l, threshold), &x, 1.0);
    }
    xtx.fill_upper_triangle_with_lower_triangle();
    let (beta, beta_q) = match xtx.cholesky() {
        Some(c) => (c.solve(&xty), c.solve(&xtq)),
        None => (Vector5::zeros(), Vector5::zeros()),
    };

    // Pass 2: per-update increments, fresh draws so the coefficients are
    // independent of the samples they adjust.
    let k = etas.len();
    let mut single = vec![RunningMoments::new(); k];
    let mut paired = vec![vec![RunningMoments::new(); k]; k];
    let mut inc = vec![0.0; k];
    let nf = n as f64;
    for _ in 0..n_samples {
        let l = kind.sample(rng);
        let x = design_row(l, &moments);
        let y = conditional_gradient(d, l, threshold) - (x.dot(&beta) - beta[0]);
        let q = conditional_gradient_square(d, l, threshold) - (x.dot(&beta_q) - beta_q[0]);
        for (i, &eta) in etas.iter().enumerate() {
            inc[i] = eta * y - 0.5 * eta * eta * nf * q * d;
            single[i].push(inc[i]);
        }
        for i in 0..k {
            for j in (i + 1)..k {
                paired[i][j].push(inc[i] - inc[j]);
            }
        }
    }
    let mut paired_se = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let se = paired[i][j].std_error();
            paired_se[i][j] = se;
            paired_se[j][i] = se;
        }
    }
    Ok(GainMeasurement {
        etas: etas.to_vec(),
        mean: single.iter().map(|m| m.mean()).collect(),
        se: single.iter().map(|m| m.std_error()).collect(),
        paired_se,
    })
}
