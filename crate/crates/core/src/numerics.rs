//! Seeded random streams, SPD linear algebra with a jitter ladder, and the few
//! special functions the rest of the crate needs.
//!
//! Random streams are `ChaCha8` generators. A stream is identified by its 64-bit
//! seed; child streams for replicates, folds or draws are created with
//! [`Rng::derive`], which mixes the parent seed and a tag through SplitMix64.
//! Standard normal variates use the ziggurat sampler of
//! `rand_distr::StandardNormal`, so a seed pins the exact bit pattern of every
//! draw on every platform.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// First diagonal jitter tried after a plain Cholesky fails.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-4;

const SYMMETRY_TOL: f64 = 1e-12;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the child stream `tag` of a parent stream with seed `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// A seeded pseudo-random stream. Single owner; hand out [`Rng::derive`]d
/// children instead of sharing one stream.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream whose seed depends only on this stream's seed and
    /// `tag`, not on how much of this stream has been consumed.
    pub fn derive(&self, tag: u64) -> Rng {
        Rng::new(derive_seed(self.seed, tag))
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn normal_vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.standard_normal())
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    /// A uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}

/// A square symmetric matrix intended to be positive (semi)definite.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    entries: DMatrix<f64>,
}

impl SpdMatrix {
    /// Wraps `entries` after checking it is square and symmetric to 1e-12
    /// relative tolerance.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::dims("SpdMatrix columns", entries.nrows(), entries.ncols()));
        }
        let scale = entries.amax().max(1.0);
        let n = entries.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                if (entries[(i, j)] - entries[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Domain(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Wraps a matrix the caller has built symmetric by construction.
    pub(crate) fn from_symmetric(entries: DMatrix<f64>) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Self { entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_symmetric(DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> SpdMatrix {
        let mut m = self.entries.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        SpdMatrix::from_symmetric(m)
    }

    /// Cholesky factorization, retrying with diagonal jitter
    /// 1e-10, 1e-9, ..., 1e-4 when the plain factorization fails.
    pub fn factor(&self) -> Result<SpdFactor> {
        if let Some(chol) = Cholesky::new(self.entries.clone()) {
            return Ok(SpdFactor {
                chol,
                jitter_applied: 0.0,
            });
        }
        let mut jitter = JITTER_START;
        while jitter <= JITTER_MAX * (1.0 + 1e-9) {
            if let Some(chol) = Cholesky::new(self.shifted(jitter).entries) {
                return Ok(SpdFactor {
                    chol,
                    jitter_applied: jitter,
                });
            }
            jitter *= 10.0;
        }
        Err(Error::NonPositiveDefinite {
            max_jitter: JITTER_MAX,
        })
    }
}

/// A Cholesky factor `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter_applied: f64,
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter_applied
    }

    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.dim() {
            return Err(Error::dims("spd_solve rhs", self.dim(), b.len()));
        }
        Ok(self.chol.solve(b))
    }

    /// `xᵀ A⁻¹ x`, computed as `‖L⁻¹x‖²`.
    pub fn inverse_quad_form(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::dims("mahalanobis vector", self.dim(), x.len()));
        }
        let w = self
            .chol
            .l_dirty()
            .solve_lower_triangular(x)
            .ok_or(Error::NonPositiveDefinite {
                max_jitter: JITTER_MAX,
            })?;
        Ok(w.norm_squared())
    }
}

/// Solution of an SPD system together with the jitter the factorization needed.
#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: DVector<f64>,
    pub jitter_applied: f64,
}

/// Solves `A x = b` through a (possibly jittered) Cholesky factorization.
pub fn spd_solve(a: &SpdMatrix, b: &DVector<f64>) -> Result<SpdSolution> {
    if b.len() != a.dim() {
        return Err(Error::dims("spd_solve rhs", a.dim(), b.len()));
    }
    let factor = a.factor()?;
    Ok(SpdSolution {
        x: factor.solve(b)?,
        jitter_applied: factor.jitter_applied(),
    })
}

/// One draw from `N(mean, cov)` as `mean + L z`.
pub fn gaussian_sample(rng: &mut Rng, mean: &DVector<f64>, cov: &SpdMatrix) -> Result<DVector<f64>> {
    if mean.len() != cov.dim() {
        return Err(Error::dims("gaussian_sample mean", cov.dim(), mean.len()));
    }
    if cov.entries().iter().all(|&v| v == 0.0) {
        return Ok(mean.clone());
    }
    let factor = cov.factor()?;
    Ok(mean + factor.lower() * rng.normal_vector(mean.len()))
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn chi_square_cdf(k: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(k as f64 / 2.0, x / 2.0)
}

/// Inverse CDF of the χ² distribution with `k` degrees of freedom, by bisection
/// on the regularized lower incomplete gamma function.
pub fn chi_square_quantile(k: usize, p: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("chi-square degrees of freedom must be >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
    }
    let mut lo = 0.0;
    let mut hi = (k as f64).max(1.0);
    while chi_square_cdf(k, hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_cdf(k, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `xᵀ cov⁻¹ x`.
pub fn mahalanobis_sq(x: &DVector<f64>, cov: &SpdMatrix) -> Result<f64> {
    if x.len() != cov.dim() {
        return Err(Error::dims("mahalanobis vector", cov.dim(), x.len()));
    }
    cov.factor()?.inverse_quad_form(x)
}
