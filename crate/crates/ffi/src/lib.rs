//! C interface to the `hebbscale` library.
//!
//! Every function returns an [`HsStatus`]. On failure the message is kept per
//! thread and can be read with [`hs_last_error`]. Handles are opaque and must
//! be released with their `_free` function. Distributions are passed as
//! strings: `"laplace"`, `"chi2"` or `"chi2:<q>"`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use hebbscale::dynamics::{adaptive_eta, run, EtaSchedule, LearnConfig};
use hebbscale::geometry::{measured_max_overlap, predicted_max_overlap};
use hebbscale::landscape::census;
use hebbscale::reduced::{gradient_stats, log_grid, predict_learning_time, GradientStats};
use hebbscale::{make_source, DistributionKind, Error, SourceSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest dimension whose census fits in 64-bit counts.
pub const HS_CENSUS_MAX_N: u32 = 40;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotConverged = 3,
    InsufficientData = 4,
    Overflow = 5,
    Numerical = 6,
    Panic = 7,
}

/// Input model: dimensions, latent distribution and mixing directions.
pub struct HsSource {
    spec: SourceSpec,
}

/// Gradient mean and spread on a grid of overlaps.
pub struct HsGradientStats {
    stats: Arc<GradientStats>,
}

/// Outcome of one learning run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HsRunResult {
    /// First step with overlap at or above the target; valid if `converged`.
    pub crossing: u64,
    pub steps: u64,
    pub final_overlap: f64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::NotConverged { .. } => HsStatus::NotConverged,
        Error::InsufficientData { .. } | Error::InsufficientSignal { .. } => HsStatus::InsufficientData,
        Error::SingularCovariance { .. } | Error::ZeroGradient { .. } | Error::NotCritical { .. } => {
            HsStatus::Numerical
        }
        _ => HsStatus::InvalidArgument,
    }
}

struct Failure(HsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: HsStatus, msg: &str) -> Failure {
    Failure(status, msg.to_string())
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("panic: {msg}"));
            HsStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller guarantees a non-null pointer is valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| fail(HsStatus::NullPointer, &format!("{name} is null")))
}

fn dist(p: *const c_char) -> Result<DistributionKind, Failure> {
    if p.is_null() {
        return Err(fail(HsStatus::NullPointer, "dist is null"));
    }
    // SAFETY: caller passes a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| fail(HsStatus::InvalidArgument, "dist is not UTF-8"))?;
    Ok(s.parse()?)
}

fn usize_of(v: u64, name: &str) -> Result<usize, Failure> {
    usize::try_from(v).map_err(|_| fail(HsStatus::Overflow, &format!("{name} does not fit in usize")))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Counts of minima, maxima and saddles on the `n`-sphere.
/// Returns `Overflow` for `n > HS_CENSUS_MAX_N`.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_census(n: u32, minima: *mut u64, maxima: *mut u64, saddles: *mut u64) -> HsStatus {
    guard(|| {
        if n > HS_CENSUS_MAX_N {
            return Err(fail(HsStatus::Overflow, "census counts overflow 64 bits beyond n = 40"));
        }
        let c = census(n as usize)?;
        let to_u64 = |b: &hebbscale::landscape::BigUint| {
            u64::try_from(b).map_err(|_| fail(HsStatus::Overflow, "census count overflows 64 bits"))
        };
        let (a, b, s) = (to_u64(&c.minima)?, to_u64(&c.maxima)?, to_u64(&c.saddles)?);
        *out(minima, "minima")? = a;
        *out(maxima, "maxima")? = b;
        *out(saddles, "saddles")? = s;
        Ok(())
    })
}

/// Predicted largest overlap of a random direction with `k` features.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_predicted_max_overlap(n: u64, k: u64, result: *mut f64) -> HsStatus {
    guard(|| {
        let v = predicted_max_overlap(usize_of(n, "n")?, usize_of(k, "k")?)?;
        *out(result, "result")? = v;
        Ok(())
    })
}

/// Monte-Carlo mean and standard deviation of the largest overlap.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_measured_max_overlap(
    n: u64,
    k: u64,
    trials: u64,
    seed: u64,
    mean: *mut f64,
    std: *mut f64,
) -> HsStatus {
    guard(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = measured_max_overlap(usize_of(n, "n")?, usize_of(k, "k")?, usize_of(trials, "trials")?, &mut rng)?;
        *out(mean, "mean")? = s.mean_max_overlap;
        *out(std, "std")? = s.std;
        Ok(())
    })
}

/// Creates a source with `n` inputs and `k` features. `seed` fixes the mixing
/// directions when `k > n`.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_source_new(
    n: u64,
    k: u64,
    distribution: *const c_char,
    seed: u64,
    source: *mut *mut HsSource,
) -> HsStatus {
    guard(|| {
        let slot = out(source, "source")?;
        let spec = make_source(usize_of(n, "n")?, usize_of(k, "k")?, dist(distribution)?, seed)?;
        *slot = Box::into_raw(Box::new(HsSource { spec }));
        Ok(())
    })
}

/// Releases a source. Null is ignored.
///
/// # Safety
/// `source` must come from [`hs_source_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_source_free(source: *mut HsSource) {
    if !source.is_null() {
        drop(unsafe { Box::from_raw(source) });
    }
}

/// Number of inputs of `source`, or 0 for null.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_source_inputs(source: *const HsSource) -> u64 {
    // SAFETY: null or a live handle.
    unsafe { source.as_ref() }.map_or(0, |s| s.spec.n_inputs() as u64)
}

/// Draws `count` input vectors into `buffer`, row-major, which must hold
/// `count * n` doubles (`len` is its length in doubles).
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_source_sample(
    source: *const HsSource,
    count: u64,
    seed: u64,
    buffer: *mut f64,
    len: u64,
) -> HsStatus {
    guard(|| {
        // SAFETY: null or a live handle.
        let src = unsafe { source.as_ref() }.ok_or_else(|| fail(HsStatus::NullPointer, "source is null"))?;
        let n = src.spec.n_inputs();
        let needed =
            usize_of(count, "count")?.checked_mul(n).ok_or_else(|| fail(HsStatus::Overflow, "count * n overflows"))?;
        if usize_of(len, "len")? < needed {
            return Err(fail(HsStatus::InvalidArgument, "buffer too small for count * n doubles"));
        }
        if needed == 0 {
            return Ok(());
        }
        if buffer.is_null() {
            return Err(fail(HsStatus::NullPointer, "buffer is null"));
        }
        // SAFETY: caller guarantees `len` writable doubles at `buffer`.
        let data = unsafe { std::slice::from_raw_parts_mut(buffer, needed) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for row in data.chunks_exact_mut(n) {
            src.spec.draw_into(&mut rng, row);
        }
        Ok(())
    })
}

/// Gradient statistics on `points` log-spaced overlaps in `[lo, hi]`.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn hs_gradstats_new(
    distribution: *const c_char,
    threshold: f64,
    lo: f64,
    hi: f64,
    points: u64,
    samples: u64,
    seed: u64,
    stats: *mut *mut HsGradientStats,
) -> HsStatus {
    guard(|| {
        let slot = out(stats, "stats")?;
        let grid = log_grid(lo, hi, usize_of(points, "points")?)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = gradient_stats(dist(distribution)?, threshold, &grid, usize_of(samples, "samples")?, &mut rng)?;
        *slot = Box::into_raw(Box::new(HsGradientStats { stats: Arc::new(s) }));
        Ok(())
    })
}

/// Releases gradient statistics. Null is ignored.
///
/// # Safety
/// `stats` must come from [`hs_gradstats_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hs_gradstats_free(stats: *mut HsGradientStats) {
    if !stats.is_null() {
        drop(unsafe { Box::from_raw(stats) });
    }
}

fn stats_ref<'a>(stats: *const HsGradientStats) -> Result<&'a HsGradientStats, Failure> {
    // SAFETY: null or a live handle.
    unsafe { stats.as_ref() }.ok_or_else(|| fail(HsStatus::NullPointer, "stats is null"))
}

/// Number of grid points, or 0 for null.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_gradstats_len(stats: *const HsGradientStats) -> u64 {
    // SAFETY: null or a live handle.
    unsafe { stats.as_ref() }.map_or(0, |s| s.stats.len() as u64)
}

/// Row `index` of the statistics: overlap, mean gradient, its standard
/// error, and gradient standard deviation.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_gradstats_row(
    stats: *const HsGradientStats,
    index: u64,
    d: *mut f64,
    mu: *mut f64,
    mu_se: *mut f64,
    sigma: *mut f64,
) -> HsStatus {
    guard(|| {
        let s = &stats_ref(stats)?.stats;
        let i = usize_of(index, "index")?;
        if i >= s.len() {
            return Err(fail(HsStatus::InvalidArgument, "index out of range"));
        }
        *out(d, "d")? = s.grid[i];
        *out(mu, "mu")? = s.mu[i];
        *out(mu_se, "mu_se")? = s.mu_se[i];
        *out(sigma, "sigma")? = s.sigma[i];
        Ok(())
    })
}

/// Predicted number of steps from overlap `d0` to `target` at input dimension `n`.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_predict_time(
    stats: *const HsGradientStats,
    n: u64,
    d0: f64,
    target: f64,
    result: *mut f64,
) -> HsStatus {
    guard(|| {
        let t = predict_learning_time(&stats_ref(stats)?.stats, usize_of(n, "n")?, d0, target)?;
        *out(result, "result")? = t;
        Ok(())
    })
}

/// Optimal learning rate at overlap `d` and input dimension `n`.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_adaptive_eta(stats: *const HsGradientStats, d: f64, n: u64, result: *mut f64) -> HsStatus {
    guard(|| {
        if !(d > 0.0 && d < 1.0) || n == 0 {
            return Err(fail(HsStatus::InvalidArgument, "need 0 < d < 1 and n > 0"));
        }
        let eta = adaptive_eta(d, &stats_ref(stats)?.stats, usize_of(n, "n")?, 0.0, f64::INFINITY);
        *out(result, "result")? = eta;
        Ok(())
    })
}

/// Runs online learning from a random start until the overlap reaches
/// `target` or `max_steps` pass. With `stats` null the rate is fixed at
/// `eta`; otherwise it is adaptive and `eta` is ignored. A run that does not
/// converge still fills `result` and returns `NotConverged`.
///
/// # Safety
/// Pointer arguments must be null or valid for the reads and writes
/// described above; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn hs_simulate(
    source: *const HsSource,
    stats: *const HsGradientStats,
    eta: f64,
    target: f64,
    max_steps: u64,
    seed: u64,
    result: *mut HsRunResult,
) -> HsStatus {
    guard(|| {
        // SAFETY: null or a live handle.
        let src = unsafe { source.as_ref() }.ok_or_else(|| fail(HsStatus::NullPointer, "source is null"))?;
        let slot = out(result, "result")?;
        let mut config = match unsafe { stats.as_ref() } {
            Some(s) => LearnConfig { eta: EtaSchedule::adaptive(s.stats.clone()), ..LearnConfig::fixed(1.0, target) },
            None => LearnConfig::fixed(eta, target),
        };
        config.max_steps = max_steps;
        config.record_every = max_steps.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = run(&src.spec, &config, seed, &mut rng)?;
        let last = t.samples.last().map_or((0, 0.0), |s| (s.step, s.overlap));
        *slot = HsRunResult {
            crossing: t.crossing.unwrap_or(0),
            steps: last.0,
            final_overlap: last.1,
            converged: t.converged,
        };
        if t.converged {
            Ok(())
        } else {
            Err(Error::NotConverged { max_steps }.into())
        }
    })
}
