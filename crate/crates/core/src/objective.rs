//! Penalized least-squares objectives over link coefficients.
//!
//! The joint objective is
//! `‖y - x^{(L)}‖² + n_scale·[λ_lower Σ_{l<L} Σ ‖φ‖² + λ_L Σ_k ‖φ_{1k}^{(L)}‖²]`.
//! For fixed lower layers the last layer is kernel ridge regression on the
//! additive kernel `K = Σ_k Q_k` of the layer-`(L-1)` outputs, so profiling it
//! out leaves `μ yᵀ(K + μI)⁻¹y + lower penalty` with `μ = n_scale·λ_L`.
//!
//! Gradients of the profile objective hold the ridge coefficients `α` fixed:
//! at the inner optimum the derivative through `α` vanishes, so only
//! `-μ αᵀ (∂K) α` remains.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::network::{backward, forward, Centers, ForwardTrace, LinkLayer, LinkTensor};
use crate::numerics::{spd_solve, SpdMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Shared penalty of layers `1..L-1`.
    pub lambda_lower: f64,
    /// Penalty of the output layer.
    pub lambda_last: f64,
    /// The `n` multiplying the penalties; the batch size under mini-batching.
    pub n_scale: usize,
}

impl PenaltyConfig {
    pub fn new(lambda_lower: f64, lambda_last: f64, n_scale: usize) -> Result<Self> {
        if !(lambda_lower > 0.0 && lambda_last > 0.0) {
            return Err(Error::Domain(format!(
                "penalties must be positive (lambda_lower = {lambda_lower}, lambda_last = {lambda_last})"
            )));
        }
        if n_scale == 0 {
            return Err(Error::Domain("n_scale must be positive".into()));
        }
        Ok(Self {
            lambda_lower,
            lambda_last,
            n_scale,
        })
    }

    pub fn with_n_scale(self, n_scale: usize) -> Self {
        Self { n_scale, ..self }
    }

    /// `μ = n_scale · λ_L`.
    pub fn ridge_shift(&self) -> f64 {
        self.n_scale as f64 * self.lambda_last
    }
}

/// `n_scale · λ_lower · Σ_{l<L} Σ_jk ‖φ_jk‖²` over the given lower layers.
pub fn penalty(lower: &[LinkLayer], kernel: &KernelConfig, cfg: &PenaltyConfig) -> f64 {
    let norms: f64 = lower.iter().map(|l| l.norm_sq_sum(kernel)).sum();
    cfg.n_scale as f64 * cfg.lambda_lower * norms
}

fn column_grams(kernel: &KernelConfig, z: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    (0..z.ncols())
        .map(|k| {
            let col: Vec<f64> = z.column(k).iter().copied().collect();
            kernel.gram(&col).into_inner()
        })
        .collect()
}

/// `K = Σ_k Q_k` with `Q_k` the Gram matrix of column `k` of `z`.
pub fn aggregate_last_kernel(kernel: &KernelConfig, z: &DMatrix<f64>) -> SpdMatrix {
    let n = z.nrows();
    let mut total = DMatrix::zeros(n, n);
    for q in column_grams(kernel, z) {
        total += q;
    }
    SpdMatrix::from_symmetric(total)
}

/// Closed-form last layer for fixed lower layers.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSolution {
    /// `(K + μI)⁻¹ y`, shared by every coordinate's representer coefficients.
    pub alpha: DVector<f64>,
    /// `K α`.
    pub fitted: DVector<f64>,
    /// `μ yᵀ α`, the minimized residual-plus-penalty of the last layer.
    pub value: f64,
    pub jitter_applied: f64,
}

pub fn last_layer_ridge(k: &SpdMatrix, y: &DVector<f64>, lambda_last: f64, n_scale: usize) -> Result<RidgeSolution> {
    if y.len() != k.dim() {
        return Err(Error::dims("ridge response", k.dim(), y.len()));
    }
    if !(lambda_last > 0.0) {
        return Err(Error::Domain(format!("lambda_last = {lambda_last} must be positive")));
    }
    let mu = n_scale as f64 * lambda_last;
    let sol = spd_solve(&k.shifted(mu), y)?;
    let fitted = k.entries() * &sol.x;
    let value = mu * y.dot(&sol.x);
    Ok(RidgeSolution {
        alpha: sol.x,
        fitted,
        value,
        jitter_applied: sol.jitter_applied,
    })
}

/// The representer-form last layer `c_{·1k} = α` with centers at the
/// layer-`(L-1)` outputs `z`.
pub fn representer_last_layer(z: &DMatrix<f64>, alpha: &DVector<f64>) -> Result<LinkLayer> {
    let (n, d) = (z.nrows(), z.ncols());
    if alpha.len() != n {
        return Err(Error::dims("last-layer alpha", n, alpha.len()));
    }
    let centers = (0..d).map(|k| z.column(k).iter().copied().collect()).collect();
    let mut coeffs = LinkTensor::zeros(n, 1, d);
    for k in 0..d {
        coeffs.link_mut(0, k).copy_from_slice(alpha.as_slice());
    }
    LinkLayer::new(Centers::PerInput(centers), coeffs)
}

/// Profile objective at the current lower layers, with everything the
/// gradient and the trainer need.
#[derive(Debug, Clone)]
pub struct ProfileEval {
    pub value: f64,
    pub ridge: RidgeSolution,
    pub penalty: f64,
    pub trace: ForwardTrace,
    grams: Vec<DMatrix<f64>>,
}

impl ProfileEval {
    /// Layer-`(L-1)` outputs of the batch.
    pub fn last_hidden(&self) -> &DMatrix<f64> {
        self.trace.outputs.last()
    }
}

fn check_batch(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Empty("batch"));
    }
    if x.nrows() != y.len() {
        return Err(Error::dims("batch response", x.nrows(), y.len()));
    }
    Ok(())
}

pub fn profile_loss(
    lower: &[LinkLayer],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kernel: &KernelConfig,
    cfg: &PenaltyConfig,
) -> Result<ProfileEval> {
    check_batch(x, y)?;
    let trace = forward(lower, kernel, x)?;
    let grams = column_grams(kernel, trace.outputs.last());
    let n = x.nrows();
    let mut k = DMatrix::zeros(n, n);
    for q in &grams {
        k += q;
    }
    let ridge = last_layer_ridge(&SpdMatrix::from_symmetric(k), y, cfg.lambda_last, cfg.n_scale)?;
    let pen = penalty(lower, kernel, cfg);
    Ok(ProfileEval {
        value: ridge.value + pen,
        ridge,
        penalty: pen,
        trace,
        grams,
    })
}

/// Profile objective and its gradient with respect to every lower-layer
/// coefficient tensor.
pub fn profile_grad(
    lower: &[LinkLayer],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kernel: &KernelConfig,
    cfg: &PenaltyConfig,
) -> Result<(ProfileEval, Vec<LinkTensor>)> {
    let eval = profile_loss(lower, x, y, kernel, cfg)?;
    if lower.is_empty() {
        return Ok((eval, Vec::new()));
    }
    let z = eval.last_hidden();
    let (n, d) = (z.nrows(), z.ncols());
    let alpha = &eval.ridge.alpha;
    let coef = 4.0 * kernel.gamma() * cfg.ridge_shift();
    let mut dz = DMatrix::zeros(n, d);
    for k in 0..d {
        let q = &eval.grams[k];
        let zc = z.column(k);
        for m in 0..n {
            let zm = zc[m];
            let mut s = 0.0;
            for i in 0..n {
                s += alpha[i] * (zm - zc[i]) * q[(m, i)];
            }
            dz[(m, k)] = coef * alpha[m] * s;
        }
    }
    let mut grads = backward(lower, kernel, &eval.trace, dz);
    let scale = cfg.n_scale as f64 * cfg.lambda_lower;
    for (layer, g) in lower.iter().zip(grads.iter_mut()) {
        layer.add_norm_grad(kernel, scale, g);
    }
    Ok((eval, grads))
}

/// Joint objective evaluated with every layer, output layer included.
#[derive(Debug, Clone)]
pub struct JointEval {
    pub value: f64,
    pub residual_ss: f64,
    pub fitted: DVector<f64>,
    pub trace: ForwardTrace,
}

fn split_layers(layers: &[LinkLayer]) -> Result<(&[LinkLayer], &LinkLayer)> {
    let (last, lower) = layers.split_last().ok_or(Error::Empty("layers"))?;
    if last.d_out() != 1 {
        return Err(Error::dims("output layer width", 1, last.d_out()));
    }
    Ok((lower, last))
}

/// `Σ_i (y_i - x^{(L)}_i)² + n_scale[λ_lower Σ_{l<L} ‖·‖² + λ_L Σ_k ‖φ^{(L)}_{1k}‖²]`
/// where `layers` holds all `L` layers.
pub fn joint_loss(
    layers: &[LinkLayer],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kernel: &KernelConfig,
    cfg: &PenaltyConfig,
) -> Result<JointEval> {
    check_batch(x, y)?;
    let (lower, last) = split_layers(layers)?;
    let trace = forward(layers, kernel, x)?;
    let fitted = DVector::from_column_slice(trace.outputs.last().as_slice());
    let residual_ss = (y - &fitted).norm_squared();
    let pen = penalty(lower, kernel, cfg) + cfg.n_scale as f64 * cfg.lambda_last * last.norm_sq_sum(kernel);
    Ok(JointEval {
        value: residual_ss + pen,
        residual_ss,
        fitted,
        trace,
    })
}

/// Joint objective and its gradient for every layer (last entry: output layer).
pub fn joint_grad(
    layers: &[LinkLayer],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kernel: &KernelConfig,
    cfg: &PenaltyConfig,
) -> Result<(JointEval, Vec<LinkTensor>)> {
    let eval = joint_loss(layers, x, y, kernel, cfg)?;
    let d_top = DMatrix::from_fn(y.len(), 1, |i, _| -2.0 * (y[i] - eval.fitted[i]));
    let mut grads = backward(layers, kernel, &eval.trace, d_top);
    let n_scale = cfg.n_scale as f64;
    let last_idx = layers.len() - 1;
    for (idx, (layer, g)) in layers.iter().zip(grads.iter_mut()).enumerate() {
        let lambda = if idx == last_idx { cfg.lambda_last } else { cfg.lambda_lower };
        layer.add_norm_grad(kernel, n_scale * lambda, g);
    }
    Ok((eval, grads))
}
