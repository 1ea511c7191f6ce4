//! Architecture, link-function parameterizations and the layerwise forward pass.
//!
//! Unit `j` of layer `l` computes `x_j = Σ_k φ_jk(x_k)` over the units `k` of
//! layer `l - 1`. Each link `φ_jk` is a kernel expansion `Σ_g a_gjk K(u_g, t)`.
//! In grid mode the centers `u_g` are a fixed inducing grid shared by all links
//! of a layer; in representer mode the centers of the links reading coordinate
//! `k` are the training values of that coordinate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{linspace, KernelConfig};
use crate::numerics::{Rng, SpdMatrix};

/// Layer widths `(D_0, ..., D_L)` with scalar output `D_L = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Architecture {
    widths: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Architecture {
    type Error = Error;

    fn try_from(widths: Vec<usize>) -> Result<Self> {
        Architecture::new(widths)
    }
}

impl From<Architecture> for Vec<usize> {
    fn from(a: Architecture) -> Self {
        a.widths
    }
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidConfig("an architecture needs at least one layer".into()));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidConfig("the output layer must have width 1".into()));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn width(&self, layer: usize) -> usize {
        self.widths[layer]
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// Width of the layer feeding the kernel-ridge output layer.
    pub fn last_hidden_width(&self) -> usize {
        self.widths[self.depth() - 1]
    }

    /// `Σ_l D_{l-1} D_l`.
    pub fn link_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1]).sum()
    }
}

/// Coefficients `a_gjk` of one layer, stored so that each link's coefficient
/// column `a_{·jk}` is contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTensor {
    basis: usize,
    d_out: usize,
    d_in: usize,
    data: Vec<f64>,
}

impl LinkTensor {
    pub fn zeros(basis: usize, d_out: usize, d_in: usize) -> Self {
        Self {
            basis,
            d_out,
            d_in,
            data: vec![0.0; basis * d_out * d_in],
        }
    }

    pub fn from_vec(basis: usize, d_out: usize, d_in: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != basis * d_out * d_in {
            return Err(Error::dims("link tensor data", basis * d_out * d_in, data.len()));
        }
        Ok(Self {
            basis,
            d_out,
            d_in,
            data,
        })
    }

    pub fn basis(&self) -> usize {
        self.basis
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    #[inline]
    fn offset(&self, j: usize, k: usize) -> usize {
        (j * self.d_in + k) * self.basis
    }

    pub fn link(&self, j: usize, k: usize) -> &[f64] {
        let o = self.offset(j, k);
        &self.data[o..o + self.basis]
    }

    pub fn link_mut(&mut self, j: usize, k: usize) -> &mut [f64] {
        let o = self.offset(j, k);
        &mut self.data[o..o + self.basis]
    }

    pub fn get(&self, g: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(j, k) + g]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Kernel centers of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Centers {
    /// One inducing grid shared by every link of the layer.
    Shared(Vec<f64>),
    /// One center set per input coordinate `k`.
    PerInput(Vec<Vec<f64>>),
}

impl Centers {
    pub fn for_input(&self, k: usize) -> &[f64] {
        match self {
            Centers::Shared(g) => g,
            Centers::PerInput(c) => &c[k],
        }
    }
}

/// Kernel values `K(u_g, x_ik)` of a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    basis: usize,
    rows: usize,
    kvals: Vec<f64>,
}

impl LayerCache {
    #[inline]
    fn at(&self, k: usize, i: usize) -> &[f64] {
        let o = (k * self.rows + i) * self.basis;
        &self.kvals[o..o + self.basis]
    }
}

/// One layer of links: centers plus a `G × D_out × D_in` coefficient tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkLayer {
    pub centers: Centers,
    pub coeffs: LinkTensor,
}

impl LinkLayer {
    pub fn new(centers: Centers, coeffs: LinkTensor) -> Result<Self> {
        match &centers {
            Centers::Shared(g) => {
                if g.len() != coeffs.basis() {
                    return Err(Error::dims("grid size", coeffs.basis(), g.len()));
                }
            }
            Centers::PerInput(c) => {
                if c.len() != coeffs.d_in() {
                    return Err(Error::dims("representer center sets", coeffs.d_in(), c.len()));
                }
                if let Some(bad) = c.iter().find(|c| c.len() != coeffs.basis()) {
                    return Err(Error::dims("representer centers", coeffs.basis(), bad.len()));
                }
            }
        }
        Ok(Self { centers, coeffs })
    }

    pub fn d_in(&self) -> usize {
        self.coeffs.d_in()
    }

    pub fn d_out(&self) -> usize {
        self.coeffs.d_out()
    }

    pub fn eval_link(&self, kernel: &KernelConfig, j: usize, k: usize, t: f64) -> f64 {
        let centers = self.centers.for_input(k);
        self.coeffs
            .link(j, k)
            .iter()
            .zip(centers)
            .map(|(a, &u)| a * kernel.eval(u, t))
            .sum()
    }

    /// Gram matrix of the centers read by coordinate `k`.
    pub fn center_gram(&self, kernel: &KernelConfig, k: usize) -> SpdMatrix {
        kernel.gram(self.centers.for_input(k))
    }

    /// `Σ_jk a_jkᵀ G_k a_jk`, the summed squared RKHS norms of the layer's links.
    pub fn norm_sq_sum(&self, kernel: &KernelConfig) -> f64 {
        let mut total = 0.0;
        let mut shared = None;
        for k in 0..self.d_in() {
            let gram = match (&self.centers, &shared) {
                (Centers::Shared(_), Some(g)) => g,
                _ => {
                    shared = Some(self.center_gram(kernel, k));
                    shared.as_ref().unwrap()
                }
            };
            for j in 0..self.d_out() {
                total += quad_form(gram.entries(), self.coeffs.link(j, k));
            }
        }
        total
    }

    /// Adds `scale · ∂/∂a (Σ aᵀ G a) = 2·scale·G a` to `grad`.
    pub fn add_norm_grad(&self, kernel: &KernelConfig, scale: f64, grad: &mut LinkTensor) {
        let mut shared = None;
        for k in 0..self.d_in() {
            let gram = match (&self.centers, &shared) {
                (Centers::Shared(_), Some(g)) => g,
                _ => {
                    shared = Some(self.center_gram(kernel, k));
                    shared.as_ref().unwrap()
                }
            };
            let m = gram.entries();
            for j in 0..self.d_out() {
                let a = self.coeffs.link(j, k);
                let out = grad.link_mut(j, k);
                for (r, o) in out.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (c, av) in a.iter().enumerate() {
                        s += m[(r, c)] * av;
                    }
                    *o += 2.0 * scale * s;
                }
            }
        }
    }

    /// Layer outputs for `input` (`n × D_in`), plus the kernel values needed by
    /// [`LinkLayer::backward`].
    pub fn forward(&self, kernel: &KernelConfig, input: &DMatrix<f64>) -> Result<(DMatrix<f64>, LayerCache)> {
        if input.ncols() != self.d_in() {
            return Err(Error::dims("layer input columns", self.d_in(), input.ncols()));
        }
        let n = input.nrows();
        let basis = self.coeffs.basis();
        let gamma = kernel.gamma();
        let mut out = DMatrix::zeros(n, self.d_out());
        let mut kvals = vec![0.0; n * self.d_in() * basis];
        let xs = input.as_slice();
        {
            let outs = out.as_mut_slice();
            for k in 0..self.d_in() {
                let centers = self.centers.for_input(k);
                for i in 0..n {
                    let t = xs[k * n + i];
                    let kv = &mut kvals[(k * n + i) * basis..(k * n + i + 1) * basis];
                    for (v, &u) in kv.iter_mut().zip(centers) {
                        let d = t - u;
                        *v = (-gamma * d * d).exp();
                    }
                    for j in 0..self.d_out() {
                        outs[j * n + i] += dot(self.coeffs.link(j, k), kv);
                    }
                }
            }
        }
        Ok((
            out,
            LayerCache {
                basis,
                rows: n,
                kvals,
            },
        ))
    }

    /// Backpropagates `d_out = ∂F/∂(layer output)`.
    ///
    /// Accumulates `∂F/∂a` into `grad` and, when `want_input` is set, returns
    /// `∂F/∂(layer input)`.
    pub fn backward(
        &self,
        kernel: &KernelConfig,
        input: &DMatrix<f64>,
        cache: &LayerCache,
        d_out: &DMatrix<f64>,
        grad: &mut LinkTensor,
        want_input: bool,
    ) -> Option<DMatrix<f64>> {
        let n = input.nrows();
        let two_gamma = 2.0 * kernel.gamma();
        let xs = input.as_slice();
        let ds = d_out.as_slice();
        let mut d_in = want_input.then(|| DMatrix::zeros(n, self.d_in()));
        for k in 0..self.d_in() {
            let centers = self.centers.for_input(k);
            for i in 0..n {
                let kv = cache.at(k, i);
                let t = xs[k * n + i];
                let mut acc_in = 0.0;
                for j in 0..self.d_out() {
                    let dj = ds[j * n + i];
                    if dj == 0.0 {
                        continue;
                    }
                    let gl = grad.link_mut(j, k);
                    for (gv, kvv) in gl.iter_mut().zip(kv) {
                        *gv += dj * kvv;
                    }
                    if want_input {
                        let a = self.coeffs.link(j, k);
                        let mut s = 0.0;
                        for g in 0..kv.len() {
                            s += a[g] * kv[g] * (t - centers[g]);
                        }
                        acc_in -= dj * two_gamma * s;
                    }
                }
                if let Some(d) = d_in.as_mut() {
                    d[(i, k)] = acc_in;
                }
            }
        }
        d_in
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad_form(m: &DMatrix<f64>, a: &[f64]) -> f64 {
    let mut total = 0.0;
    for (c, ac) in a.iter().enumerate() {
        let mut s = 0.0;
        for (r, ar) in a.iter().enumerate() {
            s += m[(r, c)] * ar;
        }
        total += ac * s;
    }
    total
}

/// `Σ_g a_g K(u_g, t)`.
pub fn link_eval_grid(kernel: &KernelConfig, grid: &[f64], coeffs: &[f64], t: f64) -> Result<f64> {
    if grid.len() != coeffs.len() {
        return Err(Error::dims("link coefficients", grid.len(), coeffs.len()));
    }
    Ok(grid.iter().zip(coeffs).map(|(&u, a)| a * kernel.eval(u, t)).sum())
}

/// `Σ_i c_i K(x_i, t)` over representer centers `x_i`.
pub fn link_eval_representer(kernel: &KernelConfig, centers: &[f64], coeffs: &[f64], t: f64) -> Result<f64> {
    link_eval_grid(kernel, centers, coeffs, t)
}

/// `aᵀ K_UU a`.
pub fn rkhs_norm_sq_grid(kuu: &SpdMatrix, coeffs: &[f64]) -> Result<f64> {
    if kuu.dim() != coeffs.len() {
        return Err(Error::dims("grid norm coefficients", kuu.dim(), coeffs.len()));
    }
    Ok(quad_form(kuu.entries(), coeffs).max(0.0))
}

/// `cᵀ Q c`.
pub fn rkhs_norm_sq_representer(q: &SpdMatrix, coeffs: &[f64]) -> Result<f64> {
    rkhs_norm_sq_grid(q, coeffs)
}

/// Per-layer outputs `x^{(0)}, ..., x^{(m)}`, each `n × D_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutputs {
    pub layers: Vec<DMatrix<f64>>,
}

impl LayerOutputs {
    pub fn last(&self) -> &DMatrix<f64> {
        self.layers.last().expect("layer 0 is always present")
    }
}

/// Layer outputs together with the caches needed for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub outputs: LayerOutputs,
    pub caches: Vec<LayerCache>,
}

/// Runs `x` through `layers` in order.
pub fn forward(layers: &[LinkLayer], kernel: &KernelConfig, x: &DMatrix<f64>) -> Result<ForwardTrace> {
    let mut outputs = vec![x.clone()];
    let mut caches = Vec::with_capacity(layers.len());
    for layer in layers {
        let (out, cache) = layer.forward(kernel, outputs.last().unwrap())?;
        outputs.push(out);
        caches.push(cache);
    }
    Ok(ForwardTrace {
        outputs: LayerOutputs { layers: outputs },
        caches,
    })
}

/// Backpropagates `d_top` (gradient w.r.t. the last layer's output) through
/// `layers`, returning one gradient tensor per layer.
pub fn backward(
    layers: &[LinkLayer],
    kernel: &KernelConfig,
    trace: &ForwardTrace,
    d_top: DMatrix<f64>,
) -> Vec<LinkTensor> {
    let mut grads: Vec<LinkTensor> = layers
        .iter()
        .map(|l| LinkTensor::zeros(l.coeffs.basis(), l.d_out(), l.d_in()))
        .collect();
    let mut d = d_top;
    for (idx, layer) in layers.iter().enumerate().rev() {
        let input = &trace.outputs.layers[idx];
        match layer.backward(kernel, input, &trace.caches[idx], &d, &mut grads[idx], idx > 0) {
            Some(next) => d = next,
            None => break,
        }
    }
    grads
}

/// Grid layout of the inducing points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of inducing points per layer.
    pub size: usize,
    /// Span of the first layer's grid before expansion; `None` takes the range
    /// of the training inputs.
    pub input_range: Option<(f64, f64)>,
    /// Span of every later layer's grid before expansion; `None` takes the
    /// range of the previous layer's outputs at initialization.
    pub hidden_range: Option<(f64, f64)>,
    /// Each grid span is widened by this fraction of its half-width on both sides.
    pub expansion: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            size: 9,
            input_range: Some((-1.0, 1.0)),
            hidden_range: None,
            expansion: 0.1,
        }
    }
}

impl GridSpec {
    fn grid_for(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (mut lo, mut hi) = (lo, hi);
        if !(hi - lo > 1e-6) {
            let c = 0.5 * (lo + hi);
            lo = c - 1.0;
            hi = c + 1.0;
        }
        let margin = self.expansion * 0.5 * (hi - lo);
        linspace(lo - margin, hi + margin, self.size)
    }
}

fn value_range(m: &DMatrix<f64>) -> (f64, f64) {
    m.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Grid-mode links for the lower layers of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBank {
    pub layers: Vec<LinkLayer>,
}

impl LinkBank {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.coeffs.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.coeffs.as_slice().iter().copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::dims("parameter vector", self.n_params(), params.len()));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let len = layer.coeffs.len();
            layer.coeffs.as_mut_slice().copy_from_slice(&params[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    pub fn forward(&self, kernel: &KernelConfig, x: &DMatrix<f64>) -> Result<ForwardTrace> {
        forward(&self.layers, kernel, x)
    }
}

/// Flattens per-layer gradient tensors in [`LinkBank::params`] order.
pub fn flatten(tensors: &[LinkTensor]) -> Vec<f64> {
    tensors.iter().flat_map(|t| t.as_slice().iter().copied()).collect()
}

/// Exact representer-form links, with the centers of layer `l` equal to the
/// training outputs of layer `l - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresenterBank {
    pub layers: Vec<LinkLayer>,
}

impl RepresenterBank {
    /// Builds the bank layer by layer from coefficient tensors `C^{(l)}`
    /// (each `n × D_l × D_{l-1}`) and the training inputs.
    pub fn build(kernel: &KernelConfig, x_train: &DMatrix<f64>, coeffs: Vec<LinkTensor>) -> Result<Self> {
        let n = x_train.nrows();
        let mut layers = Vec::with_capacity(coeffs.len());
        let mut current = x_train.clone();
        for c in coeffs {
            if c.basis() != n {
                return Err(Error::dims("representer coefficients", n, c.basis()));
            }
            let centers = (0..current.ncols()).map(|k| current.column(k).iter().copied().collect()).collect();
            let layer = LinkLayer::new(Centers::PerInput(centers), c)?;
            current = layer.forward(kernel, &current)?.0;
            layers.push(layer);
        }
        Ok(Self { layers })
    }

    pub fn forward(&self, kernel: &KernelConfig, x: &DMatrix<f64>) -> Result<ForwardTrace> {
        forward(&self.layers, kernel, x)
    }
}

/// Coefficient variance `τ_init / (G · D_{l-1})` for a layer with `d_in` inputs.
pub fn init_variance(tau_init: f64, grid_size: usize, d_in: usize) -> f64 {
    tau_init / (grid_size as f64 * d_in as f64)
}

/// Initializes the first `n_layers` layers of `arch` in grid mode.
///
/// Coefficients are i.i.d. `N(0, τ_init / (G·D_{l-1}))`. The first grid spans
/// the input range; every later grid spans the previous layer's outputs on
/// `x_train` at initialization. Both are widened by `grid.expansion` and then
/// frozen.
pub fn init_links(
    rng: &mut Rng,
    arch: &Architecture,
    kernel: &KernelConfig,
    grid: &GridSpec,
    tau_init: f64,
    x_train: &DMatrix<f64>,
    n_layers: usize,
) -> Result<LinkBank> {
    if grid.size < 2 {
        return Err(Error::InvalidConfig("inducing grid needs at least 2 points".into()));
    }
    if n_layers > arch.depth() {
        return Err(Error::InvalidConfig(format!(
            "cannot initialize {n_layers} layers of a depth-{} network",
            arch.depth()
        )));
    }
    if x_train.ncols() != arch.input_dim() {
        return Err(Error::dims("training input columns", arch.input_dim(), x_train.ncols()));
    }
    let mut layers = Vec::with_capacity(n_layers);
    let mut current = x_train.clone();
    for l in 1..=n_layers {
        let (lo, hi) = match (l, grid.input_range, grid.hidden_range) {
            (1, Some(r), _) => r,
            (l, _, Some(r)) if l > 1 => r,
            _ => value_range(&current),
        };
        let points = grid.grid_for(lo, hi);
        let (d_in, d_out) = (arch.width(l - 1), arch.width(l));
        let sd = init_variance(tau_init, grid.size, d_in).sqrt();
        let data = (0..grid.size * d_out * d_in).map(|_| sd * rng.standard_normal()).collect();
        let layer = LinkLayer::new(Centers::Shared(points), LinkTensor::from_vec(grid.size, d_out, d_in, data)?)?;
        if l < n_layers {
            current = layer.forward(kernel, &current)?.0;
        }
        layers.push(layer);
    }
    Ok(LinkBank { layers })
}

/// Frozen last-layer state: the training inputs of the output layer and the
/// shared ridge coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastLayer {
    /// `n × D_{L-1}` layer-`(L-1)` outputs of the refit data.
    pub centers: DMatrix<f64>,
    pub alpha: DVector<f64>,
}

/// A fitted (or partly fitted) network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WahkonModel {
    pub architecture: Architecture,
    pub kernel: KernelConfig,
    /// Grid-mode links of layers `1..L-1`.
    pub links: LinkBank,
    pub last_layer: Option<LastLayer>,
    pub lambda_lower: f64,
    pub lambda_last: f64,
    pub seed: u64,
}

impl WahkonModel {
    /// Outputs of layers `0..L-1` for new inputs.
    pub fn hidden_outputs(&self, x: &DMatrix<f64>) -> Result<LayerOutputs> {
        if x.ncols() != self.architecture.input_dim() {
            return Err(Error::dims("input columns", self.architecture.input_dim(), x.ncols()));
        }
        Ok(self.links.forward(&self.kernel, x)?.outputs)
    }

    /// All layer outputs including the scalar prediction layer.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<LayerOutputs> {
        let last = self.last_layer.as_ref().ok_or(Error::NotFitted)?;
        let mut outs = self.hidden_outputs(x)?;
        let pred = last_layer_predict(&self.kernel, last, outs.last())?;
        outs.layers.push(DMatrix::from_column_slice(pred.len(), 1, pred.as_slice()));
        Ok(outs)
    }
}

/// `ŷ_i = Σ_k Σ_m α_m K(z_mk, t_ik)`.
pub fn last_layer_predict(kernel: &KernelConfig, last: &LastLayer, hidden: &DMatrix<f64>) -> Result<DVector<f64>> {
    if hidden.ncols() != last.centers.ncols() {
        return Err(Error::dims("last-layer input columns", last.centers.ncols(), hidden.ncols()));
    }
    let (n, m) = (hidden.nrows(), last.centers.nrows());
    let gamma = kernel.gamma();
    let mut out = DVector::zeros(n);
    for k in 0..hidden.ncols() {
        let z = last.centers.column(k);
        let t = hidden.column(k);
        for i in 0..n {
            let ti = t[i];
            let mut s = 0.0;
            for r in 0..m {
                let d = ti - z[r];
                s += last.alpha[r] * (-gamma * d * d).exp();
            }
            out[i] += s;
        }
    }
    Ok(out)
}
