//! The hierarchical Gaussian-process prior over link functions.
//!
//! Given layer `l - 1` outputs `X` at the evaluation points, each column of
//! layer `l` is an independent draw from `N(0, τ_l Σ_k Q_k)` where `Q_k` is the
//! kernel Gram matrix of column `k` of `X`. Sampling is exact at the evaluation
//! points. The module also checks the marginal moments `E[x] = 0`,
//! `Var[x] = τ_l D_{l-1}`, the Mahalanobis diagnostics for non-Gaussianity of
//! deep layers, and the `τ_l = σ²/(nλ_l)` MAP calibration.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::network::{forward, LinkLayer};
use crate::numerics::{chi_square_cdf, chi_square_quantile, Rng, SpdMatrix};
use crate::objective::{joint_loss, PenaltyConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Layer widths `D_0..D_L`; the last layer need not be scalar.
    pub widths: Vec<usize>,
    pub kernel: KernelConfig,
    /// Per-layer scales `τ_1..τ_L`; `None` uses the variance-preserving `1/D_{l-1}`.
    pub taus: Option<Vec<f64>>,
    pub n_points: usize,
    pub n_draws: usize,
    /// Weight of the diagonal in the Mahalanobis reference covariance.
    pub shrinkage: f64,
    pub seed: u64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            widths: vec![4; 6],
            kernel: KernelConfig::prior(),
            taus: None,
            n_points: 100,
            n_draws: 1000,
            shrinkage: 0.0,
            seed: 0,
        }
    }
}

impl PriorConfig {
    pub fn depth(&self) -> usize {
        self.widths.len().saturating_sub(1)
    }

    /// Resolved `τ_l` for `l = 1..L`.
    pub fn resolved_taus(&self) -> Result<Vec<f64>> {
        let depth = self.depth();
        match &self.taus {
            None => Ok((1..=depth).map(|l| 1.0 / self.widths[l - 1] as f64).collect()),
            Some(t) if t.len() != depth => Err(Error::dims("prior taus", depth, t.len())),
            Some(t) if t.iter().any(|&v| !(v >= 0.0 && v.is_finite())) => {
                Err(Error::Domain("prior taus must be nonnegative and finite".into()))
            }
            Some(t) => Ok(t.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::InvalidConfig("prior widths need at least two positive entries".into()));
        }
        self.resolved_taus()?;
        if self.n_points < 2 {
            return Err(Error::InvalidConfig("n_points must be at least 2".into()));
        }
        if self.n_draws == 0 {
            return Err(Error::InvalidConfig("n_draws must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(Error::InvalidConfig("shrinkage must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// The shared input design: `n_points × D_0` i.i.d. Uniform[-1, 1], fixed by the seed.
    pub fn inputs(&self) -> DMatrix<f64> {
        let mut rng = Rng::new(self.seed).derive(0x1a);
        DMatrix::from_fn(self.n_points, self.widths[0], |_, _| rng.uniform_in(-1.0, 1.0))
    }
}

/// `layers[l][m]` is the `n_points × D_l` output of layer `l` in draw `m`;
/// `layers[0][m]` is the input design.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorDraws {
    pub layers: Vec<Vec<DMatrix<f64>>>,
    /// Largest jitter any conditional covariance needed.
    pub max_jitter: f64,
}

impl PriorDraws {
    pub fn n_draws(&self) -> usize {
        self.layers.first().map_or(0, Vec::len)
    }

    pub fn depth(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }
}

/// `τ Σ_k Q_k` over the columns of `x`.
pub fn conditional_covariance(kernel: &KernelConfig, x: &DMatrix<f64>, tau: f64) -> SpdMatrix {
    let n = x.nrows();
    let mut c = DMatrix::zeros(n, n);
    for k in 0..x.ncols() {
        let col: Vec<f64> = x.column(k).iter().copied().collect();
        c += kernel.gram(&col).entries();
    }
    c *= tau;
    SpdMatrix::from_symmetric(c)
}

/// Monte Carlo draws of every layer's outputs at the rows of `inputs`.
pub fn sample_prior(cfg: &PriorConfig, inputs: &DMatrix<f64>) -> Result<PriorDraws> {
    cfg.validate()?;
    if inputs.ncols() != cfg.widths[0] {
        return Err(Error::dims("prior input columns", cfg.widths[0], inputs.ncols()));
    }
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("prior inputs must be finite".into()));
    }
    let taus = cfg.resolved_taus()?;
    let n = inputs.nrows();
    let root = Rng::new(cfg.seed);
    let mut layers: Vec<Vec<DMatrix<f64>>> = vec![Vec::with_capacity(cfg.n_draws); cfg.depth() + 1];
    let mut max_jitter = 0.0f64;
    for m in 0..cfg.n_draws {
        let mut rng = root.derive(m as u64);
        let mut current = inputs.clone();
        layers[0].push(current.clone());
        for l in 1..=cfg.depth() {
            let width = cfg.widths[l];
            let next = if taus[l - 1] == 0.0 {
                DMatrix::zeros(n, width)
            } else {
                let factor = conditional_covariance(&cfg.kernel, &current, taus[l - 1]).factor()?;
                max_jitter = max_jitter.max(factor.jitter_applied());
                let lower = factor.lower();
                let z = DMatrix::from_fn(n, width, |_, _| rng.standard_normal());
                lower * z
            };
            layers[l].push(next.clone());
            current = next;
        }
    }
    Ok(PriorDraws { layers, max_jitter })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerMoments {
    pub layer: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    /// `τ_l D_{l-1}`.
    pub expected_variance: f64,
}

impl LayerMoments {
    /// Both moments within `k` standard errors of their prior values.
    pub fn within(&self, k: f64) -> bool {
        self.mean.abs() <= k * self.mean_se && (self.variance - self.expected_variance).abs() <= k * self.variance_se
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Pooled per-layer mean and second moment. Each draw contributes one average
/// over its points and units; standard errors come from the spread of those
/// independent per-draw averages.
pub fn layer_moment_check(draws: &PriorDraws, cfg: &PriorConfig) -> Result<Vec<LayerMoments>> {
    let m = draws.n_draws();
    if m < 100 {
        return Err(Error::InsufficientDraws { needed: 100, got: m });
    }
    let taus = cfg.resolved_taus()?;
    (1..=draws.depth())
        .map(|l| {
            let firsts: Vec<f64> = draws.layers[l].iter().map(|x| x.mean()).collect();
            let seconds: Vec<f64> = draws.layers[l]
                .iter()
                .map(|x| x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
                .collect();
            let (mean, mean_se) = mean_and_se(&firsts);
            let (variance, variance_se) = mean_and_se(&seconds);
            Ok(LayerMoments {
                layer: l,
                mean,
                mean_se,
                variance,
                variance_se,
                expected_variance: taus[l - 1] * cfg.widths[l - 1] as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D2Record {
    pub draw: usize,
    pub layer: usize,
    pub unit: usize,
    pub d2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MahalanobisReport {
    pub layer: usize,
    /// Pooled unit, or `None` when all units of the layer are pooled.
    pub unit: Option<usize>,
    pub dof: usize,
    pub records: Vec<D2Record>,
    /// Kolmogorov–Smirnov distance of the d² sample to `χ²_dof`.
    pub ks_distance: f64,
    pub fraction_below_50: f64,
    pub fraction_above_150: f64,
    pub jitter_applied: f64,
}

impl MahalanobisReport {
    pub fn d2(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d2).collect()
    }

    /// Empirical CDF of d² at `t`.
    pub fn ecdf(&self, t: f64) -> f64 {
        self.records.iter().filter(|r| r.d2 <= t).count() as f64 / self.records.len() as f64
    }

    /// `(empirical, theoretical)` quantile pairs for one unit (or the pool),
    /// at levels `(m - 0.5)/M`.
    pub fn qq_pairs(&self, unit: Option<usize>) -> Result<Vec<(f64, f64)>> {
        let mut d2: Vec<f64> = self
            .records
            .iter()
            .filter(|r| unit.is_none_or(|u| r.unit == u))
            .map(|r| r.d2)
            .collect();
        qq_against_chi_square(&mut d2, self.dof)
    }
}

fn qq_against_chi_square(d2: &mut [f64], dof: usize) -> Result<Vec<(f64, f64)>> {
    d2.sort_by(f64::total_cmp);
    let m = d2.len() as f64;
    d2.iter()
        .enumerate()
        .map(|(i, &v)| Ok((v, chi_square_quantile(dof, (i as f64 + 0.5) / m)?)))
        .collect()
}

/// Kolmogorov–Smirnov distance between a sample and the `χ²_dof` CDF.
pub fn ks_distance_chi_square(sample: &[f64], dof: usize) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    s.iter().enumerate().fold(0.0f64, |acc, (i, &v)| {
        let f = chi_square_cdf(dof, v);
        acc.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m)
    })
}

/// Squared Mahalanobis distances of layer-`layer` output vectors (one per
/// draw and unit) under the pooled zero-mean empirical covariance, compared
/// with `χ²_{n_points}`.
pub fn mahalanobis_diagnostics(
    draws: &PriorDraws,
    layer: usize,
    unit: Option<usize>,
    shrinkage: f64,
) -> Result<MahalanobisReport> {
    if layer == 0 || layer > draws.depth() {
        return Err(Error::Domain(format!("layer {layer} outside 1..={}", draws.depth())));
    }
    let slice = &draws.layers[layer];
    let (n, width) = (slice[0].nrows(), slice[0].ncols());
    if draws.n_draws() < n {
        return Err(Error::InsufficientDraws {
            needed: n,
            got: draws.n_draws(),
        });
    }
    let units: Vec<usize> = match unit {
        Some(u) if u >= width => return Err(Error::Domain(format!("unit {u} outside 0..{width}"))),
        Some(u) => vec![u],
        None => (0..width).collect(),
    };
    let mut cov = DMatrix::zeros(n, n);
    for x in slice {
        for &u in &units {
            let v = x.column(u);
            cov.ger(1.0, &v, &v, 1.0);
        }
    }
    cov /= (slice.len() * units.len()) as f64;
    let diag = DMatrix::from_diagonal(&cov.diagonal());
    let cov = cov * (1.0 - shrinkage) + diag * shrinkage;
    let cov = SpdMatrix::from_symmetric(0.5 * (&cov + cov.transpose()));
    let factor = cov.factor()?;
    let mut records = Vec::with_capacity(slice.len() * units.len());
    for (m, x) in slice.iter().enumerate() {
        for &u in &units {
            let v: DVector<f64> = x.column(u).into_owned();
            records.push(D2Record {
                draw: m,
                layer,
                unit: u,
                d2: factor.inverse_quad_form(&v)?,
            });
        }
    }
    let d2: Vec<f64> = records.iter().map(|r| r.d2).collect();
    let total = d2.len() as f64;
    Ok(MahalanobisReport {
        layer,
        unit,
        dof: n,
        ks_distance: ks_distance_chi_square(&d2, n),
        fraction_below_50: d2.iter().filter(|&&v| v < 50.0).count() as f64 / total,
        fraction_above_150: d2.iter().filter(|&&v| v > 150.0).count() as f64 / total,
        records,
        jitter_applied: factor.jitter_applied(),
    })
}

/// Writes `draw,layer,unit,d2` rows for every report.
pub fn write_d2_csv<W: Write>(reports: &[MahalanobisReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["draw", "layer", "unit", "d2"])?;
    for r in reports.iter().flat_map(|rep| &rep.records) {
        out.write_record([r.draw.to_string(), r.layer.to_string(), r.unit.to_string(), r.d2.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `layer,unit,empirical_q,theoretical_q` rows, one Q-Q curve per
/// layer and unit.
pub fn write_qq_csv<W: Write>(reports: &[MahalanobisReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["layer", "unit", "empirical_q", "theoretical_q"])?;
    for rep in reports {
        let mut units: Vec<usize> = rep.records.iter().map(|r| r.unit).collect();
        units.sort_unstable();
        units.dedup();
        for u in units {
            for (e, t) in rep.qq_pairs(Some(u))? {
                out.write_record([rep.layer.to_string(), u.to_string(), e.to_string(), t.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// One row of the Q-Q CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqRow {
    pub layer: usize,
    pub unit: usize,
    pub empirical_q: f64,
    pub theoretical_q: f64,
}

pub fn read_d2_csv<R: Read>(r: R) -> Result<Vec<D2Record>> {
    read_rows(r)
}

pub fn read_qq_csv<R: Read>(r: R) -> Result<Vec<QqRow>> {
    read_rows(r)
}

fn read_rows<R: Read, T: serde::de::DeserializeOwned>(r: R) -> Result<Vec<T>> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// `τ = σ² / (nλ)`.
pub fn map_tau_from_lambda(sigma_sq: f64, n: usize, lambda: f64) -> Result<f64> {
    if !(sigma_sq > 0.0 && lambda > 0.0 && n > 0) {
        return Err(Error::Domain(format!(
            "sigma_sq {sigma_sq}, n {n} and lambda {lambda} must all be positive"
        )));
    }
    Ok(sigma_sq / (n as f64 * lambda))
}

/// Calibrated `τ_1..τ_L` for penalties `λ_lower` (layers `< L`) and `λ_L`.
pub fn calibrated_taus(sigma_sq: f64, n: usize, penalties: &PenaltyConfig, depth: usize) -> Result<Vec<f64>> {
    (1..=depth)
        .map(|l| {
            let lambda = if l == depth {
                penalties.lambda_last
            } else {
                penalties.lambda_lower
            };
            map_tau_from_lambda(sigma_sq, n, lambda)
        })
        .collect()
}

/// `2σ² · [RSS/(2σ²) + ½ Σ_l τ_l⁻¹ Σ ‖φ‖²]`, the scaled negative log posterior
/// of grid-mode links (additive constants dropped).
pub fn scaled_neg_log_posterior(
    layers: &[LinkLayer],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kernel: &KernelConfig,
    sigma_sq: f64,
    taus: &[f64],
) -> Result<f64> {
    if taus.len() != layers.len() {
        return Err(Error::dims("taus", layers.len(), taus.len()));
    }
    let trace = forward(layers, kernel, x)?;
    let out = trace.outputs.last();
    let rss: f64 = (0..y.len()).map(|i| (y[i] - out[(i, 0)]).powi(2)).sum();
    let prior: f64 = layers.iter().zip(taus).map(|(l, &t)| l.norm_sq_sum(kernel) / t).sum();
    Ok(2.0 * sigma_sq * (rss / (2.0 * sigma_sq) + 0.5 * prior))
}

/// Largest `|2σ² NLP − penalized objective|` over the parameter points, with
/// the penalized objective evaluated at `n_scale = n`.
pub fn map_objective_identity_check(
    points: &[Vec<LinkLayer>],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    kernel: &KernelConfig,
    sigma_sq: f64,
    penalties: &PenaltyConfig,
    taus: &[f64],
) -> Result<f64> {
    let pen = penalties.with_n_scale(x.nrows());
    let mut worst = 0.0f64;
    for layers in points {
        let posterior = scaled_neg_log_posterior(layers, x, y, kernel, sigma_sq, taus)?;
        let objective = joint_loss(layers, x, y, kernel, &pen)?.value;
        worst = worst.max((posterior - objective).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_links, Architecture, GridSpec};
    use approx::assert_abs_diff_eq;

    fn small_cfg(widths: Vec<usize>, n_points: usize, n_draws: usize) -> PriorConfig {
        PriorConfig {
            widths,
            n_points,
            n_draws,
            seed: 11,
            ..PriorConfig::default()
        }
    }

    #[test]
    fn zero_tau_gives_zero_outputs() {
        let cfg = PriorConfig {
            taus: Some(vec![0.0; 3]),
            ..small_cfg(vec![2, 3, 2, 1], 10, 5)
        };
        let draws = sample_prior(&cfg, &cfg.inputs()).unwrap();
        for l in 1..=3 {
            assert!(draws.layers[l].iter().all(|x| x.iter().all(|&v| v == 0.0)));
        }
    }

    #[test]
    fn layer_zero_is_the_design() {
        let cfg = small_cfg(vec![2, 3, 1], 8, 4);
        let inputs = cfg.inputs();
        let draws = sample_prior(&cfg, &inputs).unwrap();
        assert!(draws.layers[0].iter().all(|x| x == &inputs));
        assert_eq!(draws.layers[1][0].shape(), (8, 3));
        assert_eq!(draws, sample_prior(&cfg, &inputs).unwrap());
    }

    #[test]
    fn variance_preserving_scale() {
        for d0 in [2usize, 8] {
            let cfg = small_cfg(vec![d0, 3, 1], 10, 2000);
            let draws = sample_prior(&cfg, &cfg.inputs()).unwrap();
            let m = layer_moment_check(&draws, &cfg).unwrap();
            assert_eq!(m[0].expected_variance, 1.0);
            assert!(m[0].within(3.5), "{:?}", m[0]);
        }
    }

    #[test]
    fn moment_check_needs_draws() {
        let cfg = small_cfg(vec![2, 2, 1], 5, 1);
        let draws = sample_prior(&cfg, &cfg.inputs()).unwrap();
        assert!(matches!(
            layer_moment_check(&draws, &cfg),
            Err(Error::InsufficientDraws { needed: 100, got: 1 })
        ));
    }

    #[test]
    fn tau_from_lambda_examples() {
        assert_abs_diff_eq!(map_tau_from_lambda(1.0, 100, 0.01).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(map_tau_from_lambda(2.0, 1, 2.0).unwrap(), 1.0);
        assert_eq!(
            map_tau_from_lambda(1.0, 200, 0.3).unwrap(),
            0.5 * map_tau_from_lambda(1.0, 100, 0.3).unwrap()
        );
        assert!(map_tau_from_lambda(0.0, 1, 1.0).is_err());
        assert!(map_tau_from_lambda(1.0, 1, -1.0).is_err());
    }

    #[test]
    fn map_identity() {
        let arch = Architecture::new(vec![2, 3, 1]).unwrap();
        let kernel = KernelConfig::default();
        let mut rng = Rng::new(5);
        let n = 15;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.uniform_in(-1.0, 1.0));
        let y = DVector::from_fn(n, |i, _| x[(i, 0)] * x[(i, 1)] + 0.1 * rng.standard_normal());
        let pen = PenaltyConfig::new(0.05, 0.2, n).unwrap();
        let sigma_sq = 0.3;
        let taus = calibrated_taus(sigma_sq, n, &pen, arch.depth()).unwrap();
        let points: Vec<Vec<LinkLayer>> = (0..10)
            .map(|_| init_links(&mut rng, &arch, &kernel, &GridSpec::default(), 1.0, &x, 2).unwrap().layers)
            .collect();
        let gap = map_objective_identity_check(&points, &x, &y, &kernel, sigma_sq, &pen, &taus).unwrap();
        assert!(gap <= 1e-9, "{gap}");

        let zero: Vec<Vec<LinkLayer>> = points
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.iter_mut().for_each(|l| l.coeffs.scale(0.0));
                p
            })
            .collect();
        assert!(map_objective_identity_check(&zero, &x, &y, &kernel, sigma_sq, &pen, &taus).unwrap() <= 1e-12);

        let doubled = PenaltyConfig::new(0.1, 0.4, n).unwrap();
        let broken = map_objective_identity_check(&points, &x, &y, &kernel, sigma_sq, &doubled, &taus).unwrap();
        assert!(broken > 1e-6);
    }

    #[test]
    fn layer_one_is_chi_square_consistent() {
        let cfg = small_cfg(vec![2, 2, 1], 20, 400);
        let draws = sample_prior(&cfg, &cfg.inputs()).unwrap();
        let rep = mahalanobis_diagnostics(&draws, 1, None, 0.0).unwrap();
        assert_eq!(rep.records.len(), 800);
        assert_eq!(rep.dof, 20);
        assert!(rep.ks_distance < 0.1, "{}", rep.ks_distance);
        let qq = rep.qq_pairs(Some(0)).unwrap();
        assert_eq!(qq.len(), 400);
        assert!(qq.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert!(mahalanobis_diagnostics(&draws, 0, None, 0.0).is_err());
        let few = sample_prior(&PriorConfig { n_draws: 10, ..cfg.clone() }, &cfg.inputs()).unwrap();
        assert!(matches!(
            mahalanobis_diagnostics(&few, 1, None, 0.0),
            Err(Error::InsufficientDraws { .. })
        ));
    }

    #[test]
    fn ks_distance_extremes() {
        assert!(ks_distance_chi_square(&[1e6; 10], 3) > 0.99);
        let mut rng = Rng::new(3);
        let sample: Vec<f64> = (0..4000).map(|_| (0..4).map(|_| rng.standard_normal().powi(2)).sum()).collect();
        assert!(ks_distance_chi_square(&sample, 4) < 0.03);
    }

    #[test]
    fn csv_headers() {
        let cfg = small_cfg(vec![2, 2, 1], 5, 6);
        let draws = sample_prior(&cfg, &cfg.inputs()).unwrap();
        let rep = mahalanobis_diagnostics(&draws, 1, None, 0.05).unwrap();
        let mut a = Vec::new();
        write_d2_csv(std::slice::from_ref(&rep), &mut a).unwrap();
        let a = String::from_utf8(a).unwrap();
        assert!(a.starts_with("draw,layer,unit,d2\n"));
        assert_eq!(a.lines().count(), 1 + 12);
        let mut b = Vec::new();
        write_qq_csv(&[rep], &mut b).unwrap();
        let b = String::from_utf8(b).unwrap();
        assert!(b.starts_with("layer,unit,empirical_q,theoretical_q\n"));
        assert_eq!(b.lines().count(), 1 + 12);
    }
}
