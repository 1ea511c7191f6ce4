//! Penalty selection: the fixed lower-layer rate rule and Bayesian
//! optimization of the last-layer penalty over cross-validated RMSE.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::benchmarks::rmse;
use crate::error::{Error, Result};
use crate::kernel::{linspace, KernelConfig};
use crate::network::Architecture;
use crate::numerics::{std_normal_cdf, std_normal_pdf, Rng, SpdFactor, SpdMatrix};
use crate::objective::PenaltyConfig;
use crate::trainer::{predict, select_entries, select_rows, train_profile, TrainConfig};

/// `n^{-4/5} · #links`.
pub fn lambda_lower(n_train: usize, arch: &Architecture) -> f64 {
    (n_train.max(1) as f64).powf(-0.8) * arch.link_count() as f64
}

/// Matérn-5/2 covariance `σ²(1 + √5 r/ℓ + 5r²/(3ℓ²)) exp(-√5 r/ℓ)`.
pub fn matern52(x: f64, y: f64, lengthscale: f64, variance: f64) -> f64 {
    let s = 5f64.sqrt() * (x - y).abs() / lengthscale;
    variance * (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Expected improvement below `best` for a Gaussian prediction.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let gain = best - mean;
    if !(std > 0.0) {
        return gain.max(0.0);
    }
    let z = gain / std;
    (gain * std_normal_cdf(z) + std * std_normal_pdf(z)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    pub total_evals: usize,
    pub initial_random: usize,
    pub bo_iters: usize,
    /// The search range is `[range_low · s, range_high · s]` with `s = λ_lower`.
    pub range_low: f64,
    pub range_high: f64,
    pub folds: usize,
    pub candidate_grid_size: usize,
    pub surrogate_noise: f64,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            total_evals: 15,
            initial_random: 5,
            bo_iters: 10,
            range_low: 0.01,
            range_high: 3.0,
            folds: 5,
            candidate_grid_size: 256,
            surrogate_noise: 1e-4,
            seed: 0,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.total_evals != self.initial_random + self.bo_iters {
            return bad(format!(
                "total_evals {} must equal initial_random {} + bo_iters {}",
                self.total_evals, self.initial_random, self.bo_iters
            ));
        }
        if self.initial_random == 0 {
            return bad("initial_random must be at least 1".into());
        }
        if !(self.range_low > 0.0 && self.range_low < self.range_high && self.range_high.is_finite()) {
            return bad(format!("invalid search range [{}, {}]", self.range_low, self.range_high));
        }
        if self.folds < 2 {
            return bad("folds must be at least 2".into());
        }
        if self.candidate_grid_size < 2 {
            return bad("candidate_grid_size must be at least 2".into());
        }
        if !(self.surrogate_noise > 0.0) {
            return bad("surrogate_noise must be positive".into());
        }
        Ok(())
    }
}

/// GP regression surrogate over one input with a Matérn-5/2 covariance.
/// Outputs are standardized internally; [`Surrogate::posterior`] works on the
/// standardized scale.
#[derive(Debug, Clone)]
pub struct Surrogate {
    inputs: Vec<f64>,
    standardized: Vec<f64>,
    lengthscale: f64,
    variance: f64,
    noise: f64,
    factor: SpdFactor,
    weights: DVector<f64>,
    center: f64,
    scale: f64,
}

impl Surrogate {
    pub fn fit(inputs: &[f64], outputs: &[f64], lengthscale: f64, variance: f64, noise: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Empty("surrogate observations"));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::dims("surrogate outputs", inputs.len(), outputs.len()));
        }
        if !(lengthscale > 0.0 && variance > 0.0 && noise >= 0.0) {
            return Err(Error::Domain("surrogate hyperparameters must be positive".into()));
        }
        let n = inputs.len();
        let center = outputs.iter().sum::<f64>() / n as f64;
        let sd = (outputs.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n as f64).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        let standardized: Vec<f64> = outputs.iter().map(|v| (v - center) / scale).collect();
        let k = DMatrix::from_fn(n, n, |i, j| {
            matern52(inputs[i], inputs[j], lengthscale, variance) + if i == j { noise } else { 0.0 }
        });
        let factor = SpdMatrix::new(k)?.factor()?;
        let weights = factor.solve(&DVector::from_column_slice(&standardized))?;
        Ok(Self {
            inputs: inputs.to_vec(),
            standardized,
            lengthscale,
            variance,
            noise,
            factor,
            weights,
            center,
            scale,
        })
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn standardized_outputs(&self) -> &[f64] {
        &self.standardized
    }

    pub fn standardize(&self, value: f64) -> f64 {
        (value - self.center) / self.scale
    }

    /// Posterior `(mean, std)` at `query`, standardized scale.
    pub fn posterior(&self, query: f64) -> Result<(f64, f64)> {
        let k = DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|&x| matern52(x, query, self.lengthscale, self.variance)),
        );
        let mean = k.dot(&self.weights);
        let var = self.variance - self.factor.inverse_quad_form(&k)?;
        Ok((mean, var.max(0.0).sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Random,
    Bo,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Random => "random",
            Phase::Bo => "bo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub index: usize,
    pub lambda: f64,
    pub cv_rmse: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub lambda: f64,
    pub cv_rmse: f64,
    pub range: (f64, f64),
    pub log: Vec<Evaluation>,
}

impl TuneResult {
    /// Writes the `eval_index,lambda,cv_rmse,phase` CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["eval_index", "lambda", "cv_rmse", "phase"])?;
        for e in &self.log {
            out.write_record([
                e.index.to_string(),
                e.lambda.to_string(),
                e.cv_rmse.to_string(),
                e.phase.as_str().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Vec<Evaluation>> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |column: usize, message: &str| Error::MalformedData {
                row: row + 1,
                column,
                message: message.into(),
            };
            let num = |c: usize| -> Result<f64> {
                rec.get(c).and_then(|s| s.parse().ok()).ok_or_else(|| bad(c + 1, "expected a number"))
            };
            let phase = match rec.get(3) {
                Some("random") => Phase::Random,
                Some("bo") => Phase::Bo,
                _ => return Err(bad(4, "expected `random` or `bo`")),
            };
            out.push(Evaluation {
                index: num(0)? as usize,
                lambda: num(1)?,
                cv_rmse: num(2)?,
                phase,
            });
        }
        Ok(out)
    }
}

/// Minimizes `objective(λ)` over `[lo, hi]` in log space: log-uniform random
/// starts, then EI-maximizing rounds on a fixed candidate grid. Returns the
/// best observed point.
pub fn bayes_opt<F>(cfg: &BoConfig, lo: f64, hi: f64, mut objective: F) -> Result<TuneResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    cfg.validate()?;
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::Domain(format!("invalid search range [{lo}, {hi}]")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut rng = Rng::new(cfg.seed).derive(0xb0);
    let candidates = linspace(a, b, cfg.candidate_grid_size);
    let lengthscale = (b - a) / 3.0;
    let mut xs = Vec::with_capacity(cfg.total_evals);
    let mut ys = Vec::with_capacity(cfg.total_evals);
    let mut log = Vec::with_capacity(cfg.total_evals);
    let mut record = |u: f64, phase: Phase, xs: &mut Vec<f64>, ys: &mut Vec<f64>| -> Result<()> {
        let lambda = u.exp().clamp(lo, hi);
        let value = objective(lambda)?;
        if !value.is_finite() {
            return Err(Error::Domain(format!("objective returned {value} at lambda {lambda}")));
        }
        log.push(Evaluation {
            index: log.len(),
            lambda,
            cv_rmse: value,
            phase,
        });
        xs.push(u);
        ys.push(value);
        Ok(())
    };
    for _ in 0..cfg.initial_random {
        let u = rng.uniform_in(a, b);
        record(u, Phase::Random, &mut xs, &mut ys)?;
    }
    for _ in 0..cfg.bo_iters {
        let s = Surrogate::fit(&xs, &ys, lengthscale, 1.0, cfg.surrogate_noise)?;
        let best = s.standardized_outputs().iter().copied().fold(f64::INFINITY, f64::min);
        let mut choice = (candidates[0], f64::NEG_INFINITY);
        for &c in &candidates {
            let (m, sd) = s.posterior(c)?;
            let ei = expected_improvement(m, sd, best);
            if ei > choice.1 {
                choice = (c, ei);
            }
        }
        record(choice.0, Phase::Bo, &mut xs, &mut ys)?;
    }
    let best = log
        .iter()
        .min_by(|p, q| p.cv_rmse.total_cmp(&q.cv_rmse))
        .expect("at least one evaluation");
    Ok(TuneResult {
        lambda: best.lambda,
        cv_rmse: best.cv_rmse,
        range: (lo, hi),
        log,
    })
}

/// Seeded permutation cut into `folds` contiguous blocks of near-equal size.
pub fn cv_folds(n: usize, folds: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::InsufficientData(format!("{n} rows cannot form {folds} folds")));
    }
    let perm = rng.permutation(n);
    Ok((0..folds)
        .map(|f| perm[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect())
}

/// Mean held-out RMSE over the folds, training from scratch on each.
#[allow(clippy::too_many_arguments)]
pub fn cross_validated_rmse(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    arch: &Architecture,
    kernel: &KernelConfig,
    penalties: &PenaltyConfig,
    train_cfg: &TrainConfig,
    folds: &[Vec<usize>],
) -> Result<f64> {
    let mut total = 0.0;
    for (f, held_out) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        let cfg = TrainConfig {
            seed: crate::numerics::derive_seed(train_cfg.seed, f as u64),
            ..train_cfg.clone()
        };
        let (model, _) = train_profile(
            &select_rows(x, &train),
            &select_entries(y, &train),
            arch,
            kernel,
            &penalties.with_n_scale(train.len()),
            &cfg,
        )?;
        let pred = predict(&model, &select_rows(x, held_out))?;
        total += rmse(pred.as_slice(), select_entries(y, held_out).as_slice())?;
    }
    Ok(total / folds.len() as f64)
}

/// Chooses `λ_L` by Bayesian optimization of 5-fold CV RMSE with `λ_lower`
/// fixed by [`lambda_lower`].
pub fn tune_last_lambda(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    arch: &Architecture,
    kernel: &KernelConfig,
    train_cfg: &TrainConfig,
    bo_cfg: &BoConfig,
) -> Result<TuneResult> {
    bo_cfg.validate()?;
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::dims("response length", n, y.len()));
    }
    let folds = cv_folds(n, bo_cfg.folds, &mut Rng::new(bo_cfg.seed).derive(0xf0))?;
    let s = lambda_lower(n, arch);
    bayes_opt(bo_cfg, bo_cfg.range_low * s, bo_cfg.range_high * s, |lambda| {
        let pen = PenaltyConfig::new(s, lambda, n)?;
        cross_validated_rmse(x, y, arch, kernel, &pen, train_cfg, &folds)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_lower_examples() {
        let unit = Architecture::new(vec![1, 1]).unwrap();
        assert_eq!(lambda_lower(1, &unit), 1.0);
        let a = Architecture::new(vec![3, 6, 6, 1]).unwrap();
        assert_eq!(a.link_count(), 60);
        assert_abs_diff_eq!(lambda_lower(100, &a), 60.0 * 100f64.powf(-0.8), epsilon = 1e-12);
        assert_abs_diff_eq!(lambda_lower(100, &a), 1.5071, epsilon = 1e-4);
        assert!(lambda_lower(200, &a) < lambda_lower(100, &a));
        let wider = Architecture::new(vec![3, 7, 6, 1]).unwrap();
        assert!(lambda_lower(100, &wider) > lambda_lower(100, &a));
    }

    #[test]
    fn matern_examples() {
        assert_eq!(matern52(0.3, 0.3, 0.7, 2.5), 2.5);
        assert_eq!(matern52(0.1, 0.9, 0.4, 1.0), matern52(0.9, 0.1, 0.4, 1.0));
        let s5 = 5f64.sqrt();
        let expected = (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        assert_abs_diff_eq!(matern52(0.0, 0.7, 0.7, 1.0), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.52399, epsilon = 1e-5);
    }

    #[test]
    fn ei_examples() {
        assert_eq!(expected_improvement(0.5, 0.0, 0.5), 0.0);
        assert_eq!(expected_improvement(-0.5, 0.0, 0.5), 1.0);
        assert_abs_diff_eq!(expected_improvement(0.5, 1.0, 0.5), 0.398_942_280_4, epsilon = 1e-9);
        assert!(expected_improvement(2.0, 1e-12, 0.0) < 1e-100);
    }

    #[test]
    fn surrogate_interpolates_and_reverts() {
        let s = Surrogate::fit(&[0.0, 1.0, 2.5], &[3.0, 1.0, 2.0], 1.0, 1.0, 1e-10).unwrap();
        for (i, &x) in [0.0, 1.0, 2.5].iter().enumerate() {
            let (m, sd) = s.posterior(x).unwrap();
            assert_abs_diff_eq!(m, s.standardized_outputs()[i], epsilon = 1e-6);
            assert!(sd < 1e-3);
        }
        let (m, sd) = s.posterior(40.0).unwrap();
        assert!(m.abs() < 1e-9);
        assert_abs_diff_eq!(sd, 1.0, epsilon = 1e-9);

        let single = Surrogate::fit(&[0.4], &[7.0], 1.0, 1.0, 0.0).unwrap();
        assert_eq!(single.posterior(0.4).unwrap().0, single.standardized_outputs()[0]);
    }

    #[test]
    fn bo_log_shape_and_argmin() {
        let cfg = BoConfig::default();
        let res = bayes_opt(&cfg, 0.01, 3.0, |l| Ok((l.ln() - 0.2f64.ln()).powi(2))).unwrap();
        assert_eq!(res.log.len(), 15);
        assert_eq!(res.log.iter().filter(|e| e.phase == Phase::Random).count(), 5);
        assert!(res.log[5..].iter().all(|e| e.phase == Phase::Bo));
        assert!(res.log.iter().all(|e| e.cv_rmse >= res.cv_rmse));
        assert!(res.log.iter().all(|e| (0.01..=3.0).contains(&e.lambda)));

        let flat = bayes_opt(&cfg, 0.01, 3.0, |_| Ok(1.0)).unwrap();
        assert_eq!(flat.log.len(), 15);
        assert!((0.01..=3.0).contains(&flat.lambda));

        let random_only = BoConfig {
            total_evals: 5,
            bo_iters: 0,
            ..cfg.clone()
        };
        let r = bayes_opt(&random_only, 0.01, 3.0, |l| Ok(l)).unwrap();
        assert_eq!(r.log.len(), 5);
        assert_eq!(r.lambda, r.log.iter().map(|e| e.lambda).fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn bo_config_invariants() {
        assert!(BoConfig::default().validate().is_ok());
        let bad = BoConfig {
            total_evals: 14,
            ..BoConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BoConfig {
            range_low: 3.0,
            range_high: 0.01,
            ..BoConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn folds_partition_rows() {
        let folds = cv_folds(23, 5, &mut Rng::new(9)).unwrap();
        assert_eq!(folds.len(), 5);
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.len() == 4 || f.len() == 5));
        assert!(cv_folds(4, 5, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn eval_log_csv_round_trip() {
        let res = bayes_opt(&BoConfig::default(), 0.1, 1.0, |l| Ok(l * l)).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"eval_index,lambda,cv_rmse,phase\n"));
        assert_eq!(TuneResult::read_csv(buf.as_slice()).unwrap(), res.log);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use crate::numerics::Rng;

        proptest! {
            #[test]
            fn ei_is_nonnegative(m in -5.0f64..5.0, s in 0.0f64..3.0, b in -5.0f64..5.0) {
                prop_assert!(expected_improvement(m, s, b) >= 0.0);
            }

            #[test]
            fn posterior_std_bounded_at_observations(
                xs in proptest::collection::vec(-3.0f64..3.0, 1..8),
                seed in 0u64..1000,
            ) {
                let mut rng = Rng::new(seed);
                let ys: Vec<f64> = xs.iter().map(|_| rng.standard_normal()).collect();
                let s = Surrogate::fit(&xs, &ys, 1.5, 1.0, 1e-4).unwrap();
                for &x in &xs {
                    let (m, sd) = s.posterior(x).unwrap();
                    prop_assert!(sd <= 1.0 + 1e-9);
                    prop_assert!(m.is_finite());
                }
            }
        }
    }
}
