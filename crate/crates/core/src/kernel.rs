//! The normalized Gaussian kernel `K(x, y) = exp(-(x - y)² / (2ℓ²))` on the
//! real line, with dense Gram and cross-kernel builders.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SpdMatrix;

/// Lengthscale used for the network's link functions.
pub const LINK_LENGTHSCALE: f64 = 0.5;
/// Lengthscale giving `exp(-(x - y)²)`, used by the prior study.
pub const PRIOR_LENGTHSCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    lengthscale: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            lengthscale: LINK_LENGTHSCALE,
        }
    }
}

impl KernelConfig {
    pub fn new(lengthscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::Domain(format!("kernel lengthscale {lengthscale} must be positive")));
        }
        Ok(Self { lengthscale })
    }

    pub fn prior() -> Self {
        Self {
            lengthscale: PRIOR_LENGTHSCALE,
        }
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    /// `1 / (2ℓ²)`.
    #[inline]
    pub(crate) fn gamma(&self) -> f64 {
        0.5 / (self.lengthscale * self.lengthscale)
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        (-self.gamma() * d * d).exp()
    }

    /// `∂K(u, t)/∂t = -(t - u)/ℓ² · K(u, t)`.
    #[inline]
    pub fn deriv_t(&self, u: f64, t: f64) -> f64 {
        -2.0 * self.gamma() * (t - u) * self.eval(u, t)
    }

    pub fn gram(&self, points: &[f64]) -> SpdMatrix {
        let n = points.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(j, j)] = 1.0;
            for i in (j + 1)..n {
                let v = self.eval(points[i], points[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SpdMatrix::from_symmetric(m)
    }

    /// `n × G` matrix with entry `(i, g) = K(points_i, grid_g)`.
    pub fn cross(&self, points: &[f64], grid: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), grid.len(), |i, g| self.eval(points[i], grid[g]))
    }

    /// `K_UU` for an inducing grid.
    pub fn grid_gram(&self, grid: &[f64]) -> SpdMatrix {
        self.gram(grid)
    }
}

/// `G` equally spaced points spanning `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count).map(|g| lo + step * g as f64).collect()
        }
    }
}
