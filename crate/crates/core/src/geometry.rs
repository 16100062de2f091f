//! Random directions on the unit sphere and the statistics of their largest
//! overlap with a set of reference features.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::stats::RunningMoments;

/// Uniform random direction: normalized vector of i.i.d. standard normals.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DVector<f64>> {
    if n == 0 {
        return Err(invalid("dimension must be positive"));
    }
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 0.0 {
            return Ok(v / norm);
        }
    }
}

/// `E|w_1|` for `w` uniform on the sphere in `n` dimensions.
pub fn mean_abs_coordinate(n: usize) -> f64 {
    let n = n as f64;
    (libm::lgamma(n / 2.0) - libm::lgamma((n + 1.0) / 2.0)).exp() / std::f64::consts::PI.sqrt()
}

/// Extreme-value prediction `sqrt(2 ln k) / sqrt(n)` for the largest overlap
/// of a random direction with `k` features, clamped to `[0, 1]`.
///
/// The asymptotic form needs `k >= 2`; for a single feature the exact mean
/// `E|w_1|` is returned instead.
pub fn predicted_max_overlap(n: usize, k: usize) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(invalid("n and k must be positive"));
    }
    if k == 1 {
        return Ok(mean_abs_coordinate(n));
    }
    Ok(((2.0 * (k as f64).ln()).sqrt() / (n as f64).sqrt()).clamp(0.0, 1.0))
}

/// Overlap between a maximum `(±1, …, ±1)/sqrt(n)` and its nearest minimum.
pub fn corner_overlap(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    Ok(1.0 / (n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapSample {
    pub n_inputs: usize,
    pub n_features: usize,
    pub max_overlap: f64,
}

/// One draw of `max_j |w . f_j|` for a random direction `w`.
///
/// For `k <= n` the references are the first `k` cardinal axes; only those
/// coordinates of `w` are drawn explicitly and the remaining squared norm is
/// a `chi2(n - k)` draw. For `k > n` the references are random directions;
/// by rotational invariance each overlap is then distributed as the first
/// coordinate of an independent random direction.
pub fn max_overlap_sample<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> OverlapSample {
    assert!(n > 0 && k > 0, "n and k must be positive");
    let max_overlap = if k <= n {
        let mut head_sq = 0.0;
        let mut head_max = 0.0f64;
        for _ in 0..k {
            let g: f64 = rng.sample(StandardNormal);
            head_sq += g * g;
            head_max = head_max.max(g.abs());
        }
        let tail_sq = if n > k { ChiSquared::new((n - k) as f64).unwrap().sample(rng) } else { 0.0 };
        head_max / (head_sq + tail_sq).sqrt()
    } else if n == 1 {
        1.0
    } else {
        let rest = ChiSquared::new((n - 1) as f64).unwrap();
        let mut best = 0.0f64;
        for _ in 0..k {
            let g: f64 = rng.sample(StandardNormal);
            let r = rest.sample(rng);
            best = best.max(g.abs() / (g * g + r).sqrt());
        }
        best
    };
    OverlapSample { n_inputs: n, n_features: k, max_overlap: max_overlap.min(1.0) }
}

/// `max_j |w . f_j|` for explicit reference directions.
pub fn max_overlap_with(w: &DVector<f64>, references: &[DVector<f64>]) -> f64 {
    references.iter().map(|f| w.dot(f).abs()).fold(0.0, f64::max)
}

/// Monte-Carlo summary of the largest overlap, one row of `geometry.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OverlapStats {
    pub n: usize,
    pub k: usize,
    pub mean_max_overlap: f64,
    pub std: f64,
    pub predicted: f64,
    #[serde(skip)]
    pub trials: usize,
}

impl OverlapStats {
    pub fn std_error(&self) -> f64 {
        self.std / (self.trials as f64).sqrt()
    }
}

pub fn measured_max_overlap<R: Rng + ?Sized>(n: usize, k: usize, trials: usize, rng: &mut R) -> Result<OverlapStats> {
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let predicted = predicted_max_overlap(n, k)?;
    let acc: RunningMoments = (0..trials).map(|_| max_overlap_sample(n, k, rng).max_overlap).collect();
    Ok(OverlapStats { n, k, mean_max_overlap: acc.mean(), std: acc.std_dev(), predicted, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn unit_vector_norm_and_rejects_zero_dim() {
        let mut r = rng(1);
        for n in [1, 2, 3, 17, 1000] {
            let v = random_unit_vector(n, &mut r).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(random_unit_vector(0, &mut r).is_err());
    }

    #[test]
    fn one_dimensional_direction_is_a_fair_sign() {
        let mut r = rng(2);
        let plus = (0..10_000)
            .filter(|_| {
                let v = random_unit_vector(1, &mut r).unwrap();
                assert_eq!(v[0].abs(), 1.0);
                v[0] > 0.0
            })
            .count();
        // Binomial(10^4, 1/2): sd = 50.
        assert!((plus as i64 - 5000).abs() < 250, "{plus}");
    }

    #[test]
    fn component_spread_in_high_dimension() {
        let mut r = rng(3);
        let acc: RunningMoments = (0..100_000).map(|_| random_unit_vector(1000, &mut r).unwrap()[0]).collect();
        // sd of the sample sd is about sd / sqrt(2 * trials).
        let se = 0.0316 / (2.0f64 * 100_000.0).sqrt();
        assert!((acc.std_dev() - 1.0 / 1000f64.sqrt()).abs() < 3.0 * se + 1e-4, "{}", acc.std_dev());
    }

    #[test]
    fn three_dimensional_marginal_is_uniform() {
        let mut r = rng(4);
        let acc: RunningMoments = (0..100_000).map(|_| random_unit_vector(3, &mut r).unwrap()[0].abs()).collect();
        assert!((acc.mean() - 0.5).abs() < 3.0 * acc.std_error(), "{}", acc.mean());
        assert!((mean_abs_coordinate(3) - 0.5).abs() < 1e-12);
        assert!((mean_abs_coordinate(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_values() {
        let p = predicted_max_overlap(1000, 10).unwrap();
        assert!((p - (2.0 * 10f64.ln()).sqrt() / 1000f64.sqrt()).abs() < 1e-15);
        assert!((p - 0.0679).abs() < 1e-4);
        assert_eq!(predicted_max_overlap(2, 1_000_000).unwrap(), 1.0);
        assert!(predicted_max_overlap(0, 3).is_err());
        assert!(predicted_max_overlap(3, 0).is_err());
        assert_eq!(predicted_max_overlap(3, 1).unwrap(), mean_abs_coordinate(3));
    }

    #[test]
    fn corner_overlap_values() {
        let c3 = corner_overlap(3).unwrap();
        assert!((c3 - 0.57735).abs() < 1e-5);
        assert!((c3.acos().to_degrees() - 54.7356).abs() < 1e-3);
        assert_eq!(corner_overlap(1).unwrap(), 1.0);
        assert!((corner_overlap(100).unwrap() - 0.1).abs() < 1e-15);
        // The corner is the worst case: the four-dimensional maximum sits at 1/2.
        assert!((corner_overlap(4).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn measured_three_by_three() {
        // Quadrature of max(|x|, |y|, |z|) over the unit sphere gives 0.83119.
        let s = measured_max_overlap(3, 3, 100_000, &mut rng(5)).unwrap();
        assert!((s.mean_max_overlap - 0.83119).abs() < 3.0 * s.std_error(), "{}", s.mean_max_overlap);
    }

    #[test]
    fn measured_matches_prediction_at_n1000_k10() {
        let s = measured_max_overlap(1000, 10, 20_000, &mut rng(6)).unwrap();
        let rel = (s.mean_max_overlap - s.predicted).abs() / s.predicted;
        assert!(rel < 0.2, "measured {} predicted {}", s.mean_max_overlap, s.predicted);
    }

    #[test]
    fn shortcut_agrees_with_explicit_orthonormal_references() {
        // Explicit computation against a random orthonormal reference set.
        let (n, k, trials) = (6, 4, 40_000);
        let mut r = rng(7);
        let basis = {
            let m = nalgebra::DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal));
            m.qr().q()
        };
        let refs: Vec<DVector<f64>> = (0..k).map(|j| basis.column(j).clone_owned()).collect();
        let explicit: RunningMoments =
            (0..trials).map(|_| max_overlap_with(&random_unit_vector(n, &mut r).unwrap(), &refs)).collect();
        let shortcut = measured_max_overlap(n, k, trials, &mut r).unwrap();
        let se = (explicit.std_error().powi(2) + shortcut.std_error().powi(2)).sqrt();
        assert!((explicit.mean() - shortcut.mean_max_overlap).abs() < 3.0 * se);

        // Overcomplete references drawn explicitly.
        let (n, k) = (5, 12);
        let explicit: RunningMoments = (0..trials)
            .map(|_| {
                let refs: Vec<_> = (0..k).map(|_| random_unit_vector(n, &mut r).unwrap()).collect();
                max_overlap_with(&random_unit_vector(n, &mut r).unwrap(), &refs)
            })
            .collect();
        let shortcut = measured_max_overlap(n, k, trials, &mut r).unwrap();
        let se = (explicit.std_error().powi(2) + shortcut.std_error().powi(2)).sqrt();
        assert!((explicit.mean() - shortcut.mean_max_overlap).abs() < 3.0 * se);
    }

    #[test]
    fn extreme_value_ratio_for_large_k() {
        let mut r = rng(8);
        for k in [1_000usize, 10_000] {
            let acc: RunningMoments = (0..2000)
                .map(|_| (0..k).map(|_| r.sample::<f64, _>(StandardNormal)).fold(f64::MIN, f64::max))
                .collect();
            let ratio = acc.mean() / (2.0 * (k as f64).ln()).sqrt();
            assert!((0.8..=1.2).contains(&ratio), "k={k} ratio={ratio}");
        }
    }

    #[test]
    fn prediction_is_monotone() {
        for n in [2usize, 10, 100, 1000] {
            for k in [2usize, 10, 100] {
                assert!(predicted_max_overlap(n + 1, k).unwrap() <= predicted_max_overlap(n, k).unwrap());
                assert!(predicted_max_overlap(n, k + 1).unwrap() >= predicted_max_overlap(n, k).unwrap());
            }
        }
    }
}
