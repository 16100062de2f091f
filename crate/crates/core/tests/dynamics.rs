use std::sync::Arc;

use hebbscale::dynamics::{
    init_weights, projected_input_normality, run, run_from, step_with, LearnConfig, StepBuffer, WeightState,
};
use hebbscale::geometry::{measured_max_overlap, random_unit_vector};
use hebbscale::reduced::{estimate_point, gradient_stats, log_grid, reduced_run, ReducedRunOptions, DEFAULT_THRESHOLD};
use hebbscale::stats::RunningMoments;
use hebbscale::{make_source, DistributionKind, SourceSpec};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit vector with signed overlap `d` on the first axis and the rest spread
/// randomly over the remaining coordinates.
fn with_overlap(n: usize, d: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let rest = random_unit_vector(n - 1, rng).unwrap();
    let s = (1.0 - d * d).sqrt();
    DVector::from_fn(n, |i, _| if i == 0 { d } else { s * rest[i - 1] })
}

/// As [`with_overlap`], but the rest has equal magnitudes and random signs,
/// so no other axis comes close to the first.
fn spread(n: usize, d: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let m = (1.0 - d * d).sqrt() / ((n - 1) as f64).sqrt();
    DVector::from_fn(n, |i, _| {
        if i == 0 {
            d
        } else if rng.random::<bool>() {
            m
        } else {
            -m
        }
    })
}

#[test]
fn initial_overlap_matches_geometry() {
    let spec = make_source(1000, 10, DistributionKind::SymmetricLaplace, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let acc: RunningMoments = (0..1000).map(|_| init_weights(&spec, &mut rng).unwrap().overlap_value()).collect();
    let oracle = measured_max_overlap(1000, 10, 100_000, &mut rng).unwrap();
    let se = (acc.std_error().powi(2) + oracle.std_error().powi(2)).sqrt();
    assert!((acc.mean() - oracle.mean_max_overlap).abs() < 3.0 * se, "{} vs {}", acc.mean(), oracle.mean_max_overlap);
    assert!((acc.mean() - 0.068).abs() / 0.068 < 0.15);

    let spec3 = make_source(3, 3, DistributionKind::SymmetricLaplace, 0).unwrap();
    for _ in 0..10_000 {
        let s = init_weights(&spec3, &mut rng).unwrap();
        assert!(s.overlap_value() >= 1.0 / 3f64.sqrt() - 1e-12);
        assert!((s.w.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn feature_is_an_attractor() {
    let n = 10;
    let spec = make_source(n, n, DistributionKind::SymmetricLaplace, 0).unwrap();
    let features = spec.feature_set();
    let mut state = WeightState::new(DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }), &features);
    let cfg = LearnConfig::fixed(0.001, 0.99);
    let mut buf = StepBuffer::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        step_with(&mut state, &spec, &features, &cfg, &mut buf, &mut rng).unwrap();
        assert!(state.overlap_value() >= 0.99, "{}", state.overlap_value());
    }
}

#[test]
fn pilot_run_converges() {
    let spec = make_source(10, 10, DistributionKind::chi_square(), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = LearnConfig { max_steps: 10_000_000, ..LearnConfig::fixed(0.01, 0.7) };
    let t = run(&spec, &cfg, 3, &mut rng).unwrap();
    assert!(t.converged, "did not converge in {} steps", cfg.max_steps);
}

#[test]
fn projected_input_kurtosis() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let big = make_source(1000, 1000, DistributionKind::SymmetricLaplace, 0).unwrap();
    let w = random_unit_vector(1000, &mut rng).unwrap();
    let k = projected_input_normality(&big, w.as_slice(), 200_000, &mut rng).unwrap();
    assert!(k.abs() < 0.05, "{k}");

    let small = make_source(200, 200, DistributionKind::SymmetricLaplace, 0).unwrap();
    let e1 = with_overlap(200, 1.0, &mut rng);
    let k = projected_input_normality(&small, e1.as_slice(), 1_000_000, &mut rng).unwrap();
    assert!((k - 3.0).abs() < 0.15, "{k}");

    // Fourth cumulants add: 3 d^4 from the feature plus 3 sum(w_i^4) elsewhere.
    let w = spread(200, 0.5, &mut rng);
    let expected = 3.0 * w.iter().map(|x| x.powi(4)).sum::<f64>();
    let k = projected_input_normality(&small, w.as_slice(), 2_000_000, &mut rng).unwrap();
    assert!((k - expected).abs() < 0.03, "{k} vs {expected}");
    assert!((expected - 3.0 * 0.0625).abs() < 0.02);
}

/// First-order drift of the overlap, `<Delta d> / eta`, against `mu(d)`.
///
/// An update moves `d = w . e1` by `eta f(u) (x1 - d u)` to first order, and
/// `<f(u) (l - d u)> = (1 - d^2) mu(d)` along the path of the reduction.
fn drift(spec: &SourceSpec, d: f64, samples: usize, rng: &mut ChaCha8Rng) -> RunningMoments {
    let n = spec.n_inputs();
    let features = spec.feature_set();
    let eta = 1e-6;
    let cfg = LearnConfig::fixed(eta, 0.99);
    let mut buf = StepBuffer::new(n);
    let w0 = spread(n, d, rng);
    let mut state = WeightState::new(w0.clone(), &features);
    let mut acc = RunningMoments::new();
    for _ in 0..samples {
        state.w.copy_from(&w0);
        step_with(&mut state, spec, &features, &cfg, &mut buf, rng).unwrap();
        acc.push((state.w[0] - d) / (eta * (1.0 - d * d)));
    }
    acc
}

#[test]
fn full_dynamics_drift_matches_reduced_gradient() {
    // One latent plus Gaussian filler: the rest of the projection is exactly
    // Gaussian, as the reduction assumes.
    let n = 200;
    let kind = DistributionKind::SymmetricLaplace;
    let spec = make_source(n, 1, kind, 0).unwrap();
    let square = make_source(n, n, kind, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [0.1, 0.3, 0.5] {
        let acc = drift(&spec, d, 1_000_000, &mut rng);
        let reduced = estimate_point(d, kind, DEFAULT_THRESHOLD, 1_000_000, 7).unwrap();
        let se = (acc.std_error().powi(2) + reduced.mu_se.powi(2)).sqrt();
        assert!(
            (acc.mean() - reduced.mu).abs() < 3.0 * se,
            "d={d}: drift {} vs mu {} (se {se})",
            acc.mean(),
            reduced.mu
        );
        // With K = N the rest is a sum of Laplace coordinates; its residual
        // kurtosis pulls the drift below mu. Reported, not asserted.
        let sq = drift(&square, d, 1_000_000, &mut rng);
        println!(
            "d={d}: K=1 drift {:.3e}, K=N drift {:.3e} (se {:.1e}), mu {:.3e}",
            acc.mean(),
            sq.mean(),
            sq.std_error(),
            reduced.mu
        );
    }
}

fn chi_stats(samples: usize) -> Arc<hebbscale::reduced::GradientStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let grid = log_grid(0.01, 0.9, 40).unwrap();
    Arc::new(gradient_stats(DistributionKind::chi_square(), DEFAULT_THRESHOLD, &grid, samples, &mut rng).unwrap())
}

#[test]
fn reduced_surrogate_tracks_full_dynamics() {
    let n = 100;
    let kind = DistributionKind::chi_square();
    let stats = chi_stats(200_000);
    let spec: SourceSpec = make_source(n, n, kind, 0).unwrap();
    let features = spec.feature_set();
    let cfg = LearnConfig::adaptive(stats.clone(), 0.7);
    let mut full = Vec::new();
    let mut surrogate = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let state = WeightState::new(spread(n, 0.2, &mut rng), &features);
        let t = run_from(&spec, state, &cfg, seed, &mut rng).unwrap();
        full.push(t.crossing.expect("full run converged") as f64);
        let r =
            reduced_run(kind, DEFAULT_THRESHOLD, n, 0.2, 0.7, &stats, &mut rng, ReducedRunOptions::default()).unwrap();
        assert!(r.converged);
        surrogate.push(r.steps as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "steps 0.2 -> 0.7: full mean {:.0} median {:.0}, reduced mean {:.0} median {:.0}",
        mean(&full),
        median(&full),
        mean(&surrogate),
        median(&surrogate)
    );
    // Compared on medians. A single-overlap recurrence can diffuse to small d,
    // where the gain per step falls like d^3 and recovery takes very long; the
    // full network instead tracks the best of N overlaps, which rarely drops
    // below the random-direction maximum. That tail dominates the reduced mean.
    let ratio = median(&surrogate) / median(&full);
    assert!((0.5..=2.0).contains(&ratio), "median ratio {ratio}");
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len().is_multiple_of(2) {
        0.5 * (s[m - 1] + s[m])
    } else {
        s[m]
    }
}

#[test]
fn sign_basin_split_is_reported() {
    // Symmetric latents, one-sided rectifier: measure how often learning ends
    // at +e_j versus -e_j. No value is asserted.
    let n = 10;
    let spec = make_source(n, n, DistributionKind::SymmetricLaplace, 0).unwrap();
    let cfg = LearnConfig::fixed(0.01, 0.9);
    let mut plus = 0;
    let trials = 40;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = run(&spec, &cfg, seed, &mut rng).unwrap();
        assert!(t.converged);
        if t.final_sign > 0.0 {
            plus += 1;
        }
    }
    println!("sign basin split at n = {n}: {plus}/{trials} runs ended at +e_j");
}
