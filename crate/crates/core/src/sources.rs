//! Whitened linear mixtures of sparse latent variables.
//!
//! Three regimes are supported, depending on the number of latent features
//! `K` relative to the input dimension `N`:
//!
//! - `K = N`: each latent drives one input coordinate (cardinal mixing), the
//!   inputs are already white.
//! - `K < N`: `K` cardinal latents plus `N - K` standard normal filler
//!   coordinates, still white.
//! - `K > N`: `K` random unit mixing directions, whitened by the symmetric
//!   inverse square root of the analytic covariance `sum_i w_i w_i^T`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry;

/// Smallest eigenvalue below which the mixing covariance counts as singular.
pub const SINGULAR_EIGENVALUE: f64 = 1e-12;
/// Number of mixing draws attempted before giving up on a singular covariance.
pub const MAX_MIXING_ATTEMPTS: usize = 16;

/// Distribution of a latent variable. Every variant has mean 0 and variance 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DistributionKind {
    /// Laplace with scale `1/sqrt(2)`.
    SymmetricLaplace,
    /// `(chi2_q - q) / sqrt(2 q)`.
    AsymmetricChiSquare {
        q: u32,
    },
    StandardNormal,
}

impl DistributionKind {
    pub const DEFAULT_CHI_SQUARE_DOF: u32 = 10;

    pub fn chi_square() -> Self {
        Self::AsymmetricChiSquare { q: Self::DEFAULT_CHI_SQUARE_DOF }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::SymmetricLaplace => {
                let u: f64 = rng.sample(Open01);
                let scale = std::f64::consts::FRAC_1_SQRT_2;
                if u < 0.5 {
                    scale * (2.0 * u).ln()
                } else {
                    -scale * (2.0 * (1.0 - u)).ln()
                }
            }
            Self::AsymmetricChiSquare { q } => {
                let mut s = 0.0;
                for _ in 0..q {
                    let z: f64 = rng.sample(StandardNormal);
                    s += z * z;
                }
                let q = f64::from(q);
                (s - q) / (2.0 * q).sqrt()
            }
            Self::StandardNormal => rng.sample(StandardNormal),
        }
    }

    /// Raw moment `E[l^k]` for `k <= 4`.
    pub fn raw_moment(&self, k: u32) -> f64 {
        match k {
            0 => 1.0,
            1 => 0.0,
            2 => 1.0,
            3 => self.skewness(),
            4 => self.excess_kurtosis() + 3.0,
            _ => panic!("raw moments are tabulated up to order 4"),
        }
    }

    pub fn skewness(&self) -> f64 {
        match *self {
            Self::AsymmetricChiSquare { q } => (8.0 / f64::from(q)).sqrt(),
            _ => 0.0,
        }
    }

    pub fn excess_kurtosis(&self) -> f64 {
        match *self {
            Self::SymmetricLaplace => 3.0,
            Self::AsymmetricChiSquare { q } => 12.0 / f64::from(q),
            Self::StandardNormal => 0.0,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, Self::AsymmetricChiSquare { .. })
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Self::StandardNormal)
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SymmetricLaplace => write!(f, "laplace"),
            Self::AsymmetricChiSquare { q } => write!(f, "chi2:{q}"),
            Self::StandardNormal => write!(f, "normal"),
        }
    }
}

impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "laplace" | "symmetric" | "sym" => Ok(Self::SymmetricLaplace),
            "chi2" | "chisq" | "asymmetric" | "asym" => Ok(Self::chi_square()),
            "normal" | "gaussian" => Ok(Self::StandardNormal),
            other => {
                let q = other
                    .strip_prefix("chi2:")
                    .and_then(|q| q.parse::<u32>().ok())
                    .filter(|&q| q > 0)
                    .ok_or_else(|| invalid(format!("unknown distribution '{other}'")))?;
                Ok(Self::AsymmetricChiSquare { q })
            }
        }
    }
}

impl TryFrom<String> for DistributionKind {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<DistributionKind> for String {
    fn from(kind: DistributionKind) -> Self {
        kind.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Square,
    Undercomplete,
    Overcomplete,
}

#[derive(Clone, Debug)]
enum Layout {
    /// Latent `i < K` drives coordinate `i`; coordinates `K..N` are Gaussian filler.
    Cardinal,
    /// `x = M A l` with `A` the `N x K` mixing matrix and `M` the whitener.
    Mixed { mixing: DMatrix<f64>, whitener: DMatrix<f64>, projection: DMatrix<f64> },
}

/// The generative model for the inputs.
#[derive(Clone, Debug)]
pub struct SourceSpec {
    n_inputs: usize,
    n_features: usize,
    kind: DistributionKind,
    layout: Layout,
}

/// Builds a source in the regime implied by `n_inputs` and `n_features`.
///
/// `seed` only matters for `K > N`, where the mixing directions are random.
pub fn make_source(n_inputs: usize, n_features: usize, kind: DistributionKind, seed: u64) -> Result<SourceSpec> {
    if n_inputs == 0 || n_features == 0 {
        return Err(invalid("source dimensions must be positive"));
    }
    if kind.is_gaussian() {
        return Err(invalid("latent features must be non-Gaussian"));
    }
    if n_features <= n_inputs {
        return Ok(SourceSpec { n_inputs, n_features, kind, layout: Layout::Cardinal });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_eigenvalue = f64::NAN;
    for _ in 0..MAX_MIXING_ATTEMPTS {
        let mut mixing = DMatrix::zeros(n_inputs, n_features);
        for j in 0..n_features {
            let w = geometry::random_unit_vector(n_inputs, &mut rng)?;
            mixing.set_column(j, &w);
        }
        match whitener_for(&mixing) {
            Ok(whitener) => {
                let projection = &whitener * &mixing;
                return Ok(SourceSpec {
                    n_inputs,
                    n_features,
                    kind,
                    layout: Layout::Mixed { mixing, whitener, projection },
                });
            }
            Err(Error::SingularCovariance { min_eigenvalue: m, .. }) => min_eigenvalue = m,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SingularCovariance { attempts: MAX_MIXING_ATTEMPTS, min_eigenvalue })
}

/// Symmetric inverse square root of `A A^T` for an `N x K` mixing matrix `A`.
pub fn whitener_for(mixing: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cov = mixing * mixing.transpose();
    let eig = SymmetricEigen::new(cov);
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_eigenvalue >= SINGULAR_EIGENVALUE) {
        return Err(Error::SingularCovariance { attempts: 1, min_eigenvalue });
    }
    let inv_sqrt = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| 1.0 / l.sqrt()));
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&inv_sqrt) * v.transpose())
}

impl SourceSpec {
    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn regime(&self) -> Regime {
        use std::cmp::Ordering::*;
        match self.n_features.cmp(&self.n_inputs) {
            Equal => Regime::Square,
            Less => Regime::Undercomplete,
            Greater => Regime::Overcomplete,
        }
    }

    /// The unit mixing vectors `w_i`, before whitening.
    pub fn mixing_vectors(&self) -> Vec<DVector<f64>> {
        match &self.layout {
            Layout::Cardinal => (0..self.n_features)
                .map(|i| DVector::from_fn(self.n_inputs, |r, _| if r == i { 1.0 } else { 0.0 }))
                .collect(),
            Layout::Mixed { mixing, .. } => mixing.column_iter().map(|c| c.clone_owned()).collect(),
        }
    }

    /// The whitening matrix, or `None` when it is the identity.
    pub fn whitener(&self) -> Option<&DMatrix<f64>> {
        match &self.layout {
            Layout::Cardinal => None,
            Layout::Mixed { whitener, .. } => Some(whitener),
        }
    }

    /// Draws one input vector into `out` (length `N`).
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_inputs);
        match &self.layout {
            Layout::Cardinal => {
                for (i, x) in out.iter_mut().enumerate() {
                    *x = if i < self.n_features { self.kind.sample(rng) } else { rng.sample(StandardNormal) };
                }
            }
            Layout::Mixed { projection, .. } => {
                out.iter_mut().for_each(|x| *x = 0.0);
                for col in projection.column_iter() {
                    let l = self.kind.sample(rng);
                    for (x, &p) in out.iter_mut().zip(col.iter()) {
                        *x += p * l;
                    }
                }
            }
        }
    }

    /// As [`Self::draw_into`], also writing the `K` latent values. Consumes
    /// the generator identically, so the input vectors match.
    pub fn draw_with_latents<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], latents: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_inputs);
        debug_assert_eq!(latents.len(), self.n_features);
        match &self.layout {
            Layout::Cardinal => {
                for (i, x) in out.iter_mut().enumerate() {
                    if i < self.n_features {
                        latents[i] = self.kind.sample(rng);
                        *x = latents[i];
                    } else {
                        *x = rng.sample(StandardNormal);
                    }
                }
            }
            Layout::Mixed { projection, .. } => {
                out.iter_mut().for_each(|x| *x = 0.0);
                for (col, lat) in projection.column_iter().zip(latents.iter_mut()) {
                    *lat = self.kind.sample(rng);
                    for (x, &p) in out.iter_mut().zip(col.iter()) {
                        *x += p * *lat;
                    }
                }
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_inputs);
        self.draw_into(rng, x.as_mut_slice());
        x
    }

    /// `count` input vectors, one per row.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> DMatrix<f64> {
        let mut rows = DMatrix::zeros(count, self.n_inputs);
        let mut buf = vec![0.0; self.n_inputs];
        for r in 0..count {
            self.draw_into(rng, &mut buf);
            for (c, &v) in buf.iter().enumerate() {
                rows[(r, c)] = v;
            }
        }
        rows
    }

    /// Latent directions in whitened input space, `normalize(M w_i)`.
    pub fn hidden_features(&self) -> Vec<DVector<f64>> {
        match &self.layout {
            Layout::Cardinal => self.mixing_vectors(),
            Layout::Mixed { projection, .. } => projection.column_iter().map(|c| c.normalize()).collect(),
        }
    }

    pub fn feature_set(&self) -> FeatureSet {
        match &self.layout {
            Layout::Cardinal => FeatureSet::Cardinal { n_inputs: self.n_inputs, k: self.n_features },
            Layout::Mixed { .. } => {
                let feats = self.hidden_features();
                let mut m = DMatrix::zeros(self.n_features, self.n_inputs);
                for (i, f) in feats.iter().enumerate() {
                    m.set_row(i, &f.transpose());
                }
                FeatureSet::Dense(m)
            }
        }
    }
}

/// Ground-truth feature directions, laid out for fast overlap queries.
#[derive(Clone, Debug)]
pub enum FeatureSet {
    Cardinal {
        n_inputs: usize,
        k: usize,
    },
    /// One unit feature per row.
    Dense(DMatrix<f64>),
}

/// Largest overlap of a weight vector with any feature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Overlap {
    /// `max_i |w . f_i|`.
    pub value: f64,
    /// Index of the feature attaining `value`.
    pub feature: usize,
    /// Signed dot product with that feature.
    pub signed: f64,
    /// `max_i w . f_i`, the overlap with the best positively aligned feature.
    pub max_positive: f64,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        match self {
            Self::Cardinal { k, .. } => *k,
            Self::Dense(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlap(&self, w: &[f64]) -> Overlap {
        let mut best = Overlap { value: f64::NEG_INFINITY, feature: 0, signed: 0.0, max_positive: f64::NEG_INFINITY };
        let mut visit = |i: usize, dot: f64| {
            if dot.abs() > best.value {
                best.value = dot.abs();
                best.feature = i;
                best.signed = dot;
            }
            if dot > best.max_positive {
                best.max_positive = dot;
            }
        };
        match self {
            Self::Cardinal { k, .. } => {
                for (i, &wi) in w.iter().take(*k).enumerate() {
                    visit(i, wi);
                }
            }
            Self::Dense(m) => {
                for (i, row) in m.row_iter().enumerate() {
                    let dot: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
                    visit(i, dot);
                }
            }
        }
        best
    }
}
