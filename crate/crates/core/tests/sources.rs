use hebbscale::sources::Regime;
use hebbscale::stats::RunningMoments;
use hebbscale::{make_source, DistributionKind, SourceSpec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Empirical covariance of `count` draws.
fn covariance(spec: &SourceSpec, count: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = spec.n_inputs();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    let mut x = nalgebra::DVector::zeros(n);
    for _ in 0..count {
        spec.draw_into(rng, x.as_mut_slice());
        acc.syger(1.0, &x, &x, 1.0);
    }
    acc.fill_upper_triangle_with_lower_triangle();
    acc / count as f64
}

#[test]
fn overcomplete_inputs_are_white() {
    let spec = make_source(50, 100, DistributionKind::chi_square(), 3).unwrap();
    assert_eq!(spec.regime(), Regime::Overcomplete);
    let s = 1_000_000;
    let cov = covariance(&spec, s, &mut ChaCha8Rng::seed_from_u64(1));
    let bound = 5.0 / (s as f64).sqrt();
    for i in 0..50 {
        for j in 0..50 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((cov[(i, j)] - target).abs() < bound, "cov[{i},{j}] = {}", cov[(i, j)]);
        }
    }
}

#[test]
fn undercomplete_inputs_are_white() {
    let spec = make_source(30, 10, DistributionKind::SymmetricLaplace, 0).unwrap();
    assert_eq!(spec.regime(), Regime::Undercomplete);
    let s = 1_000_000;
    let cov = covariance(&spec, s, &mut ChaCha8Rng::seed_from_u64(2));
    let bound = 5.0 / (s as f64).sqrt();
    assert!((&cov - DMatrix::identity(30, 30)).amax() < bound);
}

fn coordinate_moments(spec: &SourceSpec, coords: usize, count: usize, seed: u64) -> Vec<RunningMoments> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![RunningMoments::new(); coords];
    let mut x = vec![0.0; spec.n_inputs()];
    for _ in 0..count {
        spec.draw_into(&mut rng, &mut x);
        for (a, &v) in acc.iter_mut().zip(&x) {
            a.push(v);
        }
    }
    acc
}

#[test]
fn coordinates_reproduce_latent_cumulants() {
    // Asymptotic standard errors of sample skewness and excess kurtosis for
    // a distribution with the given higher moments are not closed form here,
    // so the tolerance uses 20 batches per coordinate.
    let count = 1_000_000;
    let chi = make_source(100, 100, DistributionKind::chi_square(), 0).unwrap();
    let laplace = make_source(1000, 1000, DistributionKind::SymmetricLaplace, 0).unwrap();
    for (spec, skew, kurt) in [(&chi, (0.8f64).sqrt(), 1.2), (&laplace, 0.0, 3.0)] {
        let batches: Vec<Vec<RunningMoments>> =
            (0..20).map(|b| coordinate_moments(spec, 5, count / 20, 100 + b)).collect();
        for c in 0..5 {
            let per = |f: fn(&RunningMoments) -> f64| {
                let v: Vec<f64> = batches.iter().map(|b| f(&b[c])).collect();
                let m: RunningMoments = v.iter().copied().collect();
                (m.mean(), m.std_error())
            };
            let (var, var_se) = per(RunningMoments::variance);
            let (sk, sk_se) = per(RunningMoments::skewness);
            let (ku, ku_se) = per(RunningMoments::excess_kurtosis);
            assert!((var - 1.0).abs() < 3.0 * var_se, "coord {c}: variance {var}");
            assert!((sk - skew).abs() < 3.0 * sk_se, "coord {c}: skewness {sk} vs {skew} (se {sk_se})");
            // Batch means of kurtosis carry an O(1/batch) bias, well under the tolerance.
            assert!((ku - kurt).abs() < 3.0 * ku_se + 0.01, "coord {c}: kurtosis {ku} vs {kurt} (se {ku_se})");
        }
    }
}

#[test]
fn single_feature_has_unit_variance() {
    let spec = make_source(1, 1, DistributionKind::SymmetricLaplace, 0).unwrap();
    let m = &coordinate_moments(&spec, 1, 1_000_000, 5)[0];
    assert!((0.99..=1.01).contains(&m.variance()), "{}", m.variance());
}

#[test]
fn whitened_features_track_their_latents() {
    let (n, k) = (20, 40);
    let spec = make_source(n, k, DistributionKind::SymmetricLaplace, 8).unwrap();
    let features = spec.hidden_features();
    for f in &features {
        assert!((f.norm() - 1.0).abs() < 1e-10);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut x = vec![0.0; n];
    let mut l = vec![0.0; k];
    // cross[j][i] = <(x . f_j) l_i>
    let mut cross = DMatrix::<f64>::zeros(k, k);
    let count = 200_000;
    for _ in 0..count {
        spec.draw_with_latents(&mut rng, &mut x, &mut l);
        for (j, f) in features.iter().enumerate() {
            let proj: f64 = f.iter().zip(&x).map(|(a, b)| a * b).sum();
            for (i, &li) in l.iter().enumerate() {
                cross[(j, i)] += proj * li;
            }
        }
    }
    for j in 0..k {
        let row = cross.row(j);
        let best = (0..k).max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs())).unwrap();
        assert_eq!(best, j, "projection on feature {j} correlates most with latent {best}");
    }
}

#[test]
fn latent_draws_leave_the_input_stream_unchanged() {
    for (n, k) in [(5, 5), (8, 3), (4, 9)] {
        let spec = make_source(n, k, DistributionKind::chi_square(), 1).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let (mut x, mut y, mut l) = (vec![0.0; n], vec![0.0; n], vec![0.0; k]);
        for _ in 0..100 {
            spec.draw_into(&mut a, &mut x);
            spec.draw_with_latents(&mut b, &mut y, &mut l);
            assert_eq!(x, y);
        }
    }
}
