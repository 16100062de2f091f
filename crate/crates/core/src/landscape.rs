//! Critical points of the objective `<F(w . x)>` on the unit sphere.
//!
//! Curvatures are reported for the loss `L = -<F>`, so feature directions
//! (where learning converges) are minima and fully symmetric directions are
//! maxima. A point with `k` nonzero, equal-magnitude coordinates is a maximum
//! within its `k`-dimensional support and a minimum across the remaining
//! `N - k` directions, giving the signature `(k - 1, 0, N - k)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::reduced::{objective, rectifier};
use crate::sources::SourceSpec;
use crate::stats::{batch_std_error, RunningMoments};

/// Largest dimension for which all `3^n - 1` sign patterns are enumerated.
pub const MAX_ENUMERATION_DIM: usize = 12;
pub const UNIT_NORM_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_FD_STEP: f64 = 1e-2;
pub const DEFAULT_CLASSIFY_SAMPLES: usize = 1_000_000;
/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 20;
/// Half-width of the zero band on curvature eigenvalues, in standard errors.
pub const CURVATURE_BAND: f64 = 3.0;
/// Gradient components beyond this many standard errors rule out a critical point.
pub const GRADIENT_REJECT: f64 = 6.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalCensus {
    pub n: usize,
    pub minima: BigUint,
    pub maxima: BigUint,
    pub saddles: BigUint,
}

impl CriticalCensus {
    pub fn total(&self) -> BigUint {
        &self.minima + &self.maxima + &self.saddles
    }
}

/// Closed-form counts: `2n` minima, `2^n` maxima, `3^n - 2^n - 2n - 1` saddles.
/// In one dimension the two points `+-1` are both minima.
pub fn census(n: usize) -> Result<CriticalCensus> {
    if n == 0 {
        return Err(invalid("census needs n >= 1"));
    }
    let minima = BigUint::from(2 * n);
    if n == 1 {
        return Ok(CriticalCensus { n, minima, maxima: BigUint::ZERO, saddles: BigUint::ZERO });
    }
    let exp = u32::try_from(n).map_err(|_| invalid("n too large"))?;
    let maxima = BigUint::from(2u32).pow(exp);
    let saddles = BigUint::from(3u32).pow(exp) - &maxima - &minima - 1u32;
    Ok(CriticalCensus { n, minima, maxima, saddles })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CriticalKind {
    Minimum,
    Maximum,
    Saddle,
    /// Some curvature could not be told apart from zero.
    Indeterminate,
}

/// Counts of negative, zero and positive tangent curvatures of the loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Signature {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl Signature {
    pub fn kind(&self) -> CriticalKind {
        match *self {
            Signature { zero, .. } if zero > 0 => CriticalKind::Indeterminate,
            Signature { negative: 0, .. } => CriticalKind::Minimum,
            Signature { positive: 0, .. } => CriticalKind::Maximum,
            _ => CriticalKind::Saddle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub direction: Vec<f64>,
    pub kind: CriticalKind,
    pub signature: Signature,
    /// Tangent curvature eigenvalues of the loss, ascending. Empty for
    /// enumerated points, whose signature is structural.
    pub eigenvalues: Vec<f64>,
    pub eigenvalue_se: Vec<f64>,
}

/// Structural signature of a sign pattern with `support` nonzero entries.
pub fn structural_signature(n: usize, support: usize) -> Signature {
    Signature { negative: support - 1, zero: 0, positive: n - support }
}

/// Every direction `s / sqrt(|s|_0)` with `s` in `{-1, 0, 1}^n \ {0}`.
pub fn enumerate_critical_points(n: usize) -> Result<Vec<CriticalPoint>> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if n > MAX_ENUMERATION_DIM {
        return Err(Error::EnumerationBound { n, max: MAX_ENUMERATION_DIM });
    }
    let total = 3usize.pow(n as u32);
    let mut points = Vec::with_capacity(total - 1);
    let mut digits = vec![0i8; n];
    for code in 0..total {
        let mut c = code;
        for d in digits.iter_mut() {
            *d = (c % 3) as i8 - 1;
            c /= 3;
        }
        let support = digits.iter().filter(|&&d| d != 0).count();
        if support == 0 {
            continue;
        }
        let scale = 1.0 / (support as f64).sqrt();
        let signature = structural_signature(n, support);
        let kind = if support == 1 {
            CriticalKind::Minimum
        } else if support == n {
            CriticalKind::Maximum
        } else {
            CriticalKind::Saddle
        };
        points.push(CriticalPoint {
            direction: digits.iter().map(|&d| d as f64 * scale).collect(),
            kind,
            signature,
            eigenvalues: Vec::new(),
            eigenvalue_se: Vec::new(),
        });
    }
    Ok(points)
}

fn check_unit(w: &[f64]) -> Result<()> {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() <= UNIT_NORM_TOLERANCE) {
        return Err(Error::NonUnitWeight { norm });
    }
    Ok(())
}

/// A fixed set of input draws. Evaluating every probe on the same bank gives
/// common random numbers, so differences between probes carry little noise.
#[derive(Clone, Debug)]
pub struct SampleBank {
    n_inputs: usize,
    rows: Vec<f64>,
    threshold: f64,
}

impl SampleBank {
    pub fn draw<R: Rng + ?Sized>(spec: &SourceSpec, n_samples: usize, threshold: f64, rng: &mut R) -> Result<Self> {
        if n_samples < BATCHES {
            return Err(invalid(format!("need at least {BATCHES} samples")));
        }
        let n = spec.n_inputs();
        let mut rows = vec![0.0; n * n_samples];
        for row in rows.chunks_exact_mut(n) {
            spec.draw_into(rng, row);
        }
        Ok(Self { n_inputs: n, rows, threshold })
    }

    pub fn from_rows(n_inputs: usize, rows: Vec<f64>, threshold: f64) -> Result<Self> {
        if n_inputs == 0 || !rows.len().is_multiple_of(n_inputs) || rows.len() / n_inputs < BATCHES {
            return Err(invalid("row buffer does not hold a whole number of samples"));
        }
        Ok(Self { n_inputs, rows, threshold })
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.n_inputs
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    fn batches(&self) -> impl Iterator<Item = &[f64]> {
        let per = self.len() / BATCHES;
        (0..BATCHES).map(move |b| {
            let end = if b + 1 == BATCHES { self.len() } else { (b + 1) * per };
            &self.rows[b * per * self.n_inputs..end * self.n_inputs]
        })
    }

    /// Loss `-<F(w . x)>` per batch.
    fn loss_batches(&self, w: &[f64]) -> Vec<f64> {
        self.batches()
            .map(|chunk| {
                let mut acc = 0.0;
                let mut count = 0usize;
                for x in chunk.chunks_exact(self.n_inputs) {
                    acc += objective(dot(w, x), self.threshold);
                    count += 1;
                }
                -acc / count as f64
            })
            .collect()
    }

    /// `<F(w . x)>` with its standard error.
    pub fn objective(&self, w: &[f64]) -> Result<(f64, f64)> {
        check_unit(w)?;
        let acc: RunningMoments =
            self.rows.chunks_exact(self.n_inputs).map(|x| objective(dot(w, x), self.threshold)).collect();
        Ok((acc.mean(), acc.std_error()))
    }

    /// Tangent gradient of `<F>` and the standard error of each component.
    pub fn tangent_gradient(&self, w: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        check_unit(w)?;
        let n = self.n_inputs;
        let wv = DVector::from_column_slice(w);
        let mut acc = vec![RunningMoments::new(); n];
        let mut g = DVector::zeros(n);
        for x in self.rows.chunks_exact(n) {
            let f = rectifier(dot(w, x), self.threshold);
            let xv = DVector::from_column_slice(x);
            g.copy_from(&xv);
            g *= f;
            // Per-sample tangent projection keeps the standard errors honest.
            let radial = g.dot(&wv);
            g.axpy(-radial, &wv, 1.0);
            for (a, gi) in acc.iter_mut().zip(g.iter()) {
                a.push(*gi);
            }
        }
        Ok((
            DVector::from_iterator(n, acc.iter().map(|a| a.mean())),
            DVector::from_iterator(n, acc.iter().map(|a| a.std_error())),
        ))
    }

    /// Magnitude of the tangent gradient, without per-component errors.
    pub fn gradient_magnitude(&self, w: &[f64]) -> f64 {
        let n = self.n_inputs;
        let mut g = vec![0.0; n];
        for x in self.rows.chunks_exact(n) {
            let f = rectifier(dot(w, x), self.threshold);
            if f > 0.0 {
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += f * xi;
                }
            }
        }
        let count = self.len() as f64;
        let radial = dot(&g, w);
        g.iter().zip(w).map(|(gi, wi)| (gi - radial * wi) / count).map(|t| t * t).sum::<f64>().sqrt()
    }

    /// Riemannian Hessian of the loss at `w` in the tangent basis `basis`
    /// (columns), by geodesic second differences on the bank.
    ///
    /// Returns the full-bank matrix and one matrix per batch.
    fn tangent_hessian(&self, w: &[f64], basis: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let m = basis.ncols();
        let wv = DVector::from_column_slice(w);
        let geodesic = |v: &DVector<f64>, t: f64| -> Vec<f64> { (&wv * t.cos() + v * t.sin()).as_slice().to_vec() };
        let center = self.loss_batches(w);
        let second = |v: &DVector<f64>| -> Vec<f64> {
            let plus = self.loss_batches(&geodesic(v, h));
            let minus = self.loss_batches(&geodesic(v, -h));
            (0..BATCHES).map(|b| (plus[b] - 2.0 * center[b] + minus[b]) / (h * h)).collect()
        };
        let mut per = vec![DMatrix::zeros(m, m); BATCHES];
        let diag: Vec<Vec<f64>> = (0..m).map(|a| second(&basis.column(a).clone_owned())).collect();
        for a in 0..m {
            for (b, hb) in per.iter_mut().enumerate() {
                hb[(a, a)] = diag[a][b];
            }
            for c in (a + 1)..m {
                let v = (basis.column(a) + basis.column(c)) / std::f64::consts::SQRT_2;
                let q = second(&v);
                for (b, hb) in per.iter_mut().enumerate() {
                    let off = q[b] - 0.5 * (diag[a][b] + diag[c][b]);
                    hb[(a, c)] = off;
                    hb[(c, a)] = off;
                }
            }
        }
        // Batches have (nearly) equal sizes, so the plain average is the full-bank value.
        let full = per.iter().fold(DMatrix::zeros(m, m), |acc, hb| acc + hb) / BATCHES as f64;
        (full, per)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis (as columns) of the tangent space at unit `w`.
pub fn tangent_basis(w: &[f64]) -> DMatrix<f64> {
    let n = w.len();
    let wv = DVector::from_column_slice(w);
    let skip = (0..n).max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())).unwrap_or(0);
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n.saturating_sub(1));
    for i in (0..n).filter(|&i| i != skip) {
        let mut v = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
        v.axpy(-v.dot(&wv), &wv, 1.0);
        for c in &cols {
            v.axpy(-v.dot(c), c, 1.0);
        }
        cols.push(v.normalize());
    }
    if cols.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Monte-Carlo estimate of `<F(w . x)>` and its tangent gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveEstimate {
    pub value: f64,
    pub value_se: f64,
    /// `g - (g . w) w` with `g = <x f(w . x)>`.
    pub gradient: DVector<f64>,
    pub gradient_se: DVector<f64>,
}

pub fn objective_and_gradient<R: Rng + ?Sized>(
    spec: &SourceSpec,
    w: &[f64],
    threshold: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<ObjectiveEstimate> {
    check_unit(w)?;
    if w.len() != spec.n_inputs() {
        return Err(invalid("weight dimension does not match the source"));
    }
    let bank = SampleBank::draw(spec, n_samples, threshold, rng)?;
    let (value, value_se) = bank.objective(w)?;
    let (gradient, gradient_se) = bank.tangent_gradient(w)?;
    Ok(ObjectiveEstimate { value, value_se, gradient, gradient_se })
}

/// Classifies a critical point from the signs of its tangent curvatures.
pub fn classify_point<R: Rng + ?Sized>(
    spec: &SourceSpec,
    w: &[f64],
    threshold: f64,
    n_samples: usize,
    step: f64,
    rng: &mut R,
) -> Result<CriticalPoint> {
    check_unit(w)?;
    if w.len() != spec.n_inputs() {
        return Err(invalid("weight dimension does not match the source"));
    }
    if !(step > 0.0 && step < 0.5) {
        return Err(invalid("finite-difference step must lie in (0, 0.5)"));
    }
    let bank = SampleBank::draw(spec, n_samples, threshold, rng)?;
    classify_on_bank(&bank, w, step)
}

/// As [`classify_point`], on a caller-supplied bank.
pub fn classify_on_bank(bank: &SampleBank, w: &[f64], step: f64) -> Result<CriticalPoint> {
    check_unit(w)?;
    let basis = tangent_basis(w);
    let (g, g_se) = bank.tangent_gradient(w)?;
    let tangent = basis.transpose() * &g;
    let tangent_se = (basis.transpose().map(|x| x * x) * g_se.map(|x| x * x)).map(f64::sqrt);
    let z = tangent.iter().zip(tangent_se.iter()).map(|(g, s)| (g / s).abs()).fold(0.0, f64::max);
    if z > GRADIENT_REJECT {
        return Err(Error::NotCritical { z_score: z });
    }

    let (full, per) = bank.tangent_hessian(w, &basis, step);
    let m = basis.ncols();
    let (eigenvalues, se) = if m == 0 {
        (Vec::new(), Vec::new())
    } else {
        let eig = SymmetricEigen::new(full);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut values = Vec::with_capacity(m);
        let mut errors = Vec::with_capacity(m);
        for &i in &order {
            let e = eig.eigenvectors.column(i);
            // Batch Hessians projected on the full-bank eigenvectors.
            let projected: Vec<f64> = per.iter().map(|hb| (e.transpose() * hb * e)[(0, 0)]).collect();
            values.push(eig.eigenvalues[i]);
            errors.push(batch_std_error(&projected));
        }
        (values, errors)
    };
    let mut signature = Signature { negative: 0, zero: 0, positive: 0 };
    for (l, s) in eigenvalues.iter().zip(&se) {
        if l.abs() <= CURVATURE_BAND * s {
            signature.zero += 1;
        } else if *l < 0.0 {
            signature.negative += 1;
        } else {
            signature.positive += 1;
        }
    }
    Ok(CriticalPoint { direction: w.to_vec(), kind: signature.kind(), signature, eigenvalues, eigenvalue_se: se })
}

/// One cell of `landscape3d.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldCell {
    pub theta: f64,
    pub phi: f64,
    pub grad_magnitude: f64,
}

pub fn spherical_to_unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Tangent-gradient magnitude on a `(resolution + 1) x 2 resolution` grid of
/// polar angle `theta in [0, pi]` and azimuth `phi in [0, 2 pi)`. All cells
/// share one bank of samples.
pub fn sphere_gradient_field<R: Rng + ?Sized>(
    spec: &SourceSpec,
    threshold: f64,
    resolution: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<FieldCell>> {
    if spec.n_inputs() != 3 {
        return Err(invalid(format!("gradient field needs n = 3, got {}", spec.n_inputs())));
    }
    if resolution < 2 {
        return Err(invalid("resolution must be at least 2"));
    }
    let bank = SampleBank::draw(spec, n_samples, threshold, rng)?;
    let cells: Vec<(f64, f64)> = (0..=resolution)
        .flat_map(|i| {
            let theta = std::f64::consts::PI * i as f64 / resolution as f64;
            (0..2 * resolution).map(move |j| (theta, std::f64::consts::PI * j as f64 / resolution as f64))
        })
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(theta, phi)| FieldCell {
            theta,
            phi,
            grad_magnitude: bank.gradient_magnitude(&spherical_to_unit(theta, phi)),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{make_source, DistributionKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn census_closed_form() {
        let c = census(3).unwrap();
        assert_eq!((c.minima, c.maxima, c.saddles), (6u32.into(), 8u32.into(), 12u32.into()));
        let c = census(2).unwrap();
        assert_eq!(c.saddles, BigUint::ZERO);
        assert_eq!(census(10).unwrap().saddles, BigUint::from(58_004u32));
        let c = census(1).unwrap();
        assert_eq!((c.minima, c.maxima), (2u32.into(), BigUint::ZERO));
        assert!(census(0).is_err());
        // No overflow far beyond 64-bit range.
        let big = census(100).unwrap();
        assert_eq!(big.total() + 1u32, BigUint::from(3u32).pow(100));
    }

    #[test]
    fn enumeration_matches_census() {
        for n in 1..=8 {
            let pts = enumerate_critical_points(n).unwrap();
            let c = census(n).unwrap();
            let count = |k| BigUint::from(pts.iter().filter(|p| p.kind == k).count());
            assert_eq!(count(CriticalKind::Minimum), c.minima);
            if n > 1 {
                assert_eq!(count(CriticalKind::Maximum), c.maxima);
                assert_eq!(count(CriticalKind::Saddle), c.saddles);
            }
            for p in &pts {
                let norm = p.direction.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
        assert!(matches!(enumerate_critical_points(13), Err(Error::EnumerationBound { n: 13, max: 12 })));
    }

    #[test]
    fn two_dimensional_points() {
        let pts = enumerate_critical_points(2).unwrap();
        assert_eq!(pts.len(), 8);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let maxima: Vec<_> = pts.iter().filter(|p| p.kind == CriticalKind::Maximum).collect();
        assert_eq!(maxima.len(), 4);
        assert!(maxima.iter().all(|p| p.direction.iter().all(|x| (x.abs() - s).abs() < 1e-15)));
    }

    #[test]
    fn structural_signature_of_a_four_dimensional_saddle() {
        let pts = enumerate_critical_points(4).unwrap();
        let p = pts
            .iter()
            .find(|p| p.direction[0] > 0.0 && p.direction[1] > 0.0 && p.direction[2] == 0.0 && p.direction[3] == 0.0)
            .unwrap();
        assert_eq!(p.signature, Signature { negative: 1, zero: 0, positive: 2 });
    }

    #[test]
    fn rejects_non_unit_weights() {
        let spec = make_source(3, 3, DistributionKind::SymmetricLaplace, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            objective_and_gradient(&spec, &[1.0, 0.1, 0.0], 2.0, 100, &mut rng),
            Err(Error::NonUnitWeight { .. })
        ));
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        let w = [0.6, 0.0, 0.8, 0.0];
        let b = tangent_basis(&w);
        assert_eq!(b.ncols(), 3);
        let gram = b.transpose() * &b;
        assert!((gram - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        let wv = DVector::from_column_slice(&w);
        assert!((b.transpose() * wv).abs().max() < 1e-12);
    }

    #[test]
    fn gradient_field_rejects_other_dimensions() {
        let spec = make_source(4, 4, DistributionKind::SymmetricLaplace, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sphere_gradient_field(&spec, 2.0, 8, 100, &mut rng).is_err());
    }
}
