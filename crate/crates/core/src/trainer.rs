//! Mini-batch Adam training of the lower layers, early stopping on a held-out
//! validation split, the final full-data last-layer refit, and prediction.

use std::io::{Read, Write};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::benchmarks::rmse;
use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::network::{flatten, init_links, last_layer_predict, Architecture, GridSpec, LastLayer, LinkBank, WahkonModel};
use crate::objective::{aggregate_last_kernel, joint_grad, last_layer_ridge, profile_grad, PenaltyConfig};
use crate::numerics::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    /// Steps without an improvement of at least `min_improvement` before stopping.
    pub patience: usize,
    pub min_improvement: f64,
    pub validation_fraction: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Initial link variance scale; coefficients get variance `τ_init / (G·D_{l-1})`.
    pub tau_init: f64,
    pub grid: GridSpec,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            batch_size: 200,
            max_steps: 500,
            patience: 50,
            min_improvement: 1e-5,
            validation_fraction: 0.2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            tau_init: 1.0,
            grid: GridSpec::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        if !(self.tau_init >= 0.0) {
            return bad("tau_init must be nonnegative");
        }
        if self.grid.size < 2 {
            return bad("grid size must be at least 2");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

/// Adam with bias-corrected moments over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n_params: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::dims("Adam parameters", self.m.len(), params.len()));
        }
        if grads.len() != self.m.len() {
            return Err(Error::dims("Adam gradients", self.m.len(), grads.len()));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Patience-based stopping rule on a loss to be minimized.
///
/// `best` tracks the lowest value seen (for snapshots); the patience counter
/// only resets when a value beats the last significant improvement by at
/// least `min_improvement`.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    min_improvement: f64,
    reference: f64,
    best: f64,
    since_improvement: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    /// The value is the lowest seen so far.
    pub new_best: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_improvement: f64) -> Self {
        Self {
            patience,
            min_improvement,
            reference: f64::INFINITY,
            best: f64::INFINITY,
            since_improvement: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, value: f64) -> Observation {
        let new_best = value < self.best;
        if new_best {
            self.best = value;
        }
        if value < self.reference - self.min_improvement {
            self.reference = value;
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        Observation {
            new_best,
            stop: self.since_improvement >= self.patience,
        }
    }
}

/// Seeded `(train, validation)` row split.
pub fn split_validation(n: usize, fraction: f64, rng: &mut Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_valid = (n as f64 * fraction).floor() as usize;
    if n_valid < 1 {
        return Err(Error::InsufficientData(format!(
            "{n} rows leave no validation rows at fraction {fraction}"
        )));
    }
    if n_valid >= n {
        return Err(Error::InsufficientData(format!("{n} rows leave no training rows")));
    }
    let perm = rng.permutation(n);
    let valid = perm[..n_valid].to_vec();
    let train = perm[n_valid..].to_vec();
    Ok((train, valid))
}

/// Epoch-wise shuffled batches drawn without replacement. A partial batch at
/// the end of an epoch is dropped; when the pool is smaller than the batch
/// size every batch is the whole pool.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    pool: Vec<usize>,
    batch: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: Rng,
}

impl BatchSampler {
    pub fn new(pool: Vec<usize>, batch_size: usize, rng: Rng) -> Self {
        let batch = batch_size.min(pool.len());
        Self {
            pool,
            batch,
            order: Vec::new(),
            cursor: 0,
            rng,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor + self.batch > self.order.len() {
            self.order = self.pool.clone();
            self.rng.shuffle(&mut self.order);
            self.cursor = 0;
        }
        let out = self.order[self.cursor..self.cursor + self.batch].to_vec();
        self.cursor += self.batch;
        out
    }
}

pub fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    x.select_rows(rows.iter())
}

pub fn select_entries(y: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&r| y[r]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Profile,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Batch objective value at the start of the step.
    pub train_loss: f64,
    /// Batch RMSE of the current fit.
    pub train_rmse: f64,
    pub valid_rmse: f64,
    /// RMSE on an optional monitoring set.
    pub test_rmse: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub objective: Objective,
    pub records: Vec<StepRecord>,
    pub best_step: Option<usize>,
    pub stopped_early: bool,
    /// The returned model's last layer comes from a full-data ridge refit
    /// rather than the trained output-layer coefficients.
    pub last_layer_refit: bool,
}

impl TrainHistory {
    fn new(objective: Objective) -> Self {
        Self {
            objective,
            records: Vec::new(),
            best_step: None,
            stopped_early: false,
            last_layer_refit: objective == Objective::Direct,
        }
    }

    pub fn best_valid_rmse(&self) -> Option<f64> {
        self.best_step.map(|s| self.records[s].valid_rmse)
    }

    /// Writes the `step,train_rmse,valid_rmse,wall_ms` CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step", "train_rmse", "valid_rmse", "wall_ms"])?;
        for r in &self.records {
            out.write_record([
                r.step.to_string(),
                r.train_rmse.to_string(),
                r.valid_rmse.to_string(),
                r.wall_ms.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads back the records of [`TrainHistory::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Vec<StepRecord>> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| -> Result<f64> {
                rec.get(c).and_then(|s| s.parse().ok()).ok_or_else(|| Error::MalformedData {
                    row: row + 1,
                    column: c + 1,
                    message: "expected a number".into(),
                })
            };
            out.push(StepRecord {
                step: field(0)? as usize,
                train_loss: f64::NAN,
                train_rmse: field(1)?,
                valid_rmse: field(2)?,
                test_rmse: None,
                wall_ms: field(3)?,
            });
        }
        Ok(out)
    }
}

/// How the profile trainer scores an optional monitoring set each step.
#[derive(Debug, Clone, Copy)]
pub struct Monitor<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
}

fn check_training_data(x: &DMatrix<f64>, y: &DVector<f64>, arch: &Architecture, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::dims("response length", x.nrows(), y.len()));
    }
    if x.ncols() != arch.input_dim() {
        return Err(Error::dims("input columns", arch.input_dim(), x.ncols()));
    }
    if x.nrows() < 10 {
        return Err(Error::InsufficientData(format!("need at least 10 rows, got {}", x.nrows())));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("training data contains non-finite values".into()));
    }
    Ok(())
}

/// Refits the shared last-layer ridge coefficients on `(x, y)` with
/// `n_scale = n` and stores them in the model.
pub fn refit_last_layer(model: &mut WahkonModel, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let hidden = model.hidden_outputs(x)?;
    let z = hidden.last().clone();
    let k = aggregate_last_kernel(&model.kernel, &z);
    let ridge = last_layer_ridge(&k, y, model.lambda_last, x.nrows())?;
    model.last_layer = Some(LastLayer {
        centers: z,
        alpha: ridge.alpha,
    });
    Ok(ridge.fitted)
}

struct Setup {
    train_rows: Vec<usize>,
    x_valid: DMatrix<f64>,
    y_valid: DVector<f64>,
    sampler: BatchSampler,
    bank: LinkBank,
}

fn setup(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    arch: &Architecture,
    kernel: &KernelConfig,
    cfg: &TrainConfig,
    n_layers: usize,
) -> Result<Setup> {
    let root = Rng::new(cfg.seed);
    let (train_rows, valid_rows) = split_validation(x.nrows(), cfg.validation_fraction, &mut root.derive(1))?;
    let x_train = select_rows(x, &train_rows);
    let bank = init_links(&mut root.derive(2), arch, kernel, &cfg.grid, cfg.tau_init, &x_train, n_layers)?;
    Ok(Setup {
        sampler: BatchSampler::new(train_rows.clone(), cfg.batch_size, root.derive(3)),
        x_valid: select_rows(x, &valid_rows),
        y_valid: select_entries(y, &valid_rows),
        train_rows,
        bank,
    })
}

/// Minimizes the profile objective over the lower layers, then refits the
/// last layer on all of `(x, y)`.
pub fn train_profile(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    arch: &Architecture,
    kernel: &KernelConfig,
    penalties: &PenaltyConfig,
    cfg: &TrainConfig,
) -> Result<(WahkonModel, TrainHistory)> {
    train_profile_monitored(x, y, arch, kernel, penalties, cfg, None)
}

/// [`train_profile`] that also records, every step, the RMSE on `monitor` of
/// the model obtained by refitting the last layer on the training rows.
pub fn train_profile_monitored(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    arch: &Architecture,
    kernel: &KernelConfig,
    penalties: &PenaltyConfig,
    cfg: &TrainConfig,
    monitor: Option<Monitor<'_>>,
) -> Result<(WahkonModel, TrainHistory)> {
    check_training_data(x, y, arch, cfg)?;
    let start = Instant::now();
    let Setup {
        train_rows,
        x_valid,
        y_valid,
        mut sampler,
        mut bank,
    } = setup(x, y, arch, kernel, cfg, arch.depth() - 1)?;
    let batch_pen = penalties.with_n_scale(sampler.batch_size());
    let mut model = WahkonModel {
        architecture: arch.clone(),
        kernel: *kernel,
        links: bank.clone(),
        last_layer: None,
        lambda_lower: penalties.lambda_lower,
        lambda_last: penalties.lambda_last,
        seed: cfg.seed,
    };
    let (x_fit, y_fit) = (select_rows(x, &train_rows), select_entries(y, &train_rows));
    let mut adam = Adam::new(cfg.adam(), bank.n_params());
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.min_improvement);
    let mut history = TrainHistory::new(Objective::Profile);
    let mut best_params = bank.params();

    for step in 0..cfg.max_steps {
        let rows = sampler.next_batch();
        let (xb, yb) = (select_rows(x, &rows), select_entries(y, &rows));
        let (eval, grads) = profile_grad(&bank.layers, &xb, &yb, kernel, &batch_pen)?;
        let train_rmse = rmse(eval.ridge.fitted.as_slice(), yb.as_slice())?;
        let batch_last = LastLayer {
            centers: eval.last_hidden().clone(),
            alpha: eval.ridge.alpha.clone(),
        };
        let hv = bank.forward(kernel, &x_valid)?;
        let pv = last_layer_predict(kernel, &batch_last, hv.outputs.last())?;
        let valid_rmse = rmse(pv.as_slice(), y_valid.as_slice())?;
        let test_rmse = match monitor {
            Some(m) => {
                model.links = bank.clone();
                refit_last_layer(&mut model, &x_fit, &y_fit)?;
                Some(rmse(predict(&model, m.x)?.as_slice(), m.y.as_slice())?)
            }
            None => None,
        };
        history.records.push(StepRecord {
            step,
            train_loss: eval.value,
            train_rmse,
            valid_rmse,
            test_rmse,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        let obs = stopper.observe(valid_rmse);
        if obs.new_best {
            history.best_step = Some(step);
            best_params = bank.params();
        }
        if obs.stop {
            history.stopped_early = true;
            break;
        }
        let mut params = bank.params();
        adam.step(&mut params, &flatten(&grads))?;
        bank.set_params(&params)?;
    }

    bank.set_params(&best_params)?;
    model.links = bank;
    refit_last_layer(&mut model, x, y)?;
    Ok((model, history))
}

/// Gradient descent on the joint objective over all layers, including the
/// grid-form output layer. The returned model keeps the trained lower layers
/// and replaces the output layer by a full-data ridge refit so that it
/// predicts through the same path as profile-trained models.
pub fn train_direct(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    arch: &Architecture,
    kernel: &KernelConfig,
    penalties: &PenaltyConfig,
    cfg: &TrainConfig,
    monitor: Option<Monitor<'_>>,
) -> Result<(WahkonModel, TrainHistory)> {
    check_training_data(x, y, arch, cfg)?;
    let start = Instant::now();
    let Setup {
        x_valid,
        y_valid,
        mut sampler,
        mut bank,
        ..
    } = setup(x, y, arch, kernel, cfg, arch.depth())?;
    let batch_pen = penalties.with_n_scale(sampler.batch_size());
    let mut adam = Adam::new(cfg.adam(), bank.n_params());
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.min_improvement);
    let mut history = TrainHistory::new(Objective::Direct);
    let mut best_params = bank.params();
    let predict_all = |bank: &LinkBank, xs: &DMatrix<f64>| -> Result<Vec<f64>> {
        Ok(bank.forward(kernel, xs)?.outputs.last().as_slice().to_vec())
    };

    for step in 0..cfg.max_steps {
        let rows = sampler.next_batch();
        let (xb, yb) = (select_rows(x, &rows), select_entries(y, &rows));
        let (eval, grads) = joint_grad(&bank.layers, &xb, &yb, kernel, &batch_pen)?;
        let train_rmse = (eval.residual_ss / yb.len() as f64).sqrt();
        let valid_rmse = rmse(&predict_all(&bank, &x_valid)?, y_valid.as_slice())?;
        let test_rmse = match monitor {
            Some(m) => Some(rmse(&predict_all(&bank, m.x)?, m.y.as_slice())?),
            None => None,
        };
        history.records.push(StepRecord {
            step,
            train_loss: eval.value,
            train_rmse,
            valid_rmse,
            test_rmse,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        let obs = stopper.observe(valid_rmse);
        if obs.new_best {
            history.best_step = Some(step);
            best_params = bank.params();
        }
        if obs.stop {
            history.stopped_early = true;
            break;
        }
        let mut params = bank.params();
        adam.step(&mut params, &flatten(&grads))?;
        bank.set_params(&params)?;
    }

    bank.set_params(&best_params)?;
    bank.layers.pop();
    let mut model = WahkonModel {
        architecture: arch.clone(),
        kernel: *kernel,
        links: bank,
        last_layer: None,
        lambda_lower: penalties.lambda_lower,
        lambda_last: penalties.lambda_last,
        seed: cfg.seed,
    };
    refit_last_layer(&mut model, x, y)?;
    Ok((model, history))
}

/// Predictions `Σ_k Σ_m α_m K(z_mk, t_ik)` for new inputs.
pub fn predict(model: &WahkonModel, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let last = model.last_layer.as_ref().ok_or(Error::NotFitted)?;
    let hidden = model.hidden_outputs(x)?;
    last_layer_predict(&model.kernel, last, hidden.last())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn adam_cfg() -> AdamConfig {
        TrainConfig::default().adam()
    }

    #[test]
    fn adam_first_step() {
        let mut adam = Adam::new(adam_cfg(), 1);
        let mut p = [0.0];
        adam.step(&mut p, &[1.0]).unwrap();
        assert_abs_diff_eq!(p[0], -0.005 / (1.0 + 1e-8), epsilon = 1e-15);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn adam_zero_gradient_is_a_fixed_point() {
        let mut adam = Adam::new(adam_cfg(), 3);
        let mut p = [0.3, -1.0, 2.0];
        for _ in 0..100 {
            adam.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, [0.3, -1.0, 2.0]);
    }

    #[test]
    fn adam_first_step_is_odd() {
        let g = [0.7, -2.0, 1e-3];
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
        Adam::new(adam_cfg(), 3).step(&mut a, &g).unwrap();
        Adam::new(adam_cfg(), 3).step(&mut b, &neg).unwrap();
        for i in 0..3 {
            assert_eq!(a[i], -b[i]);
        }
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut adam = Adam::new(adam_cfg(), 2);
        assert!(adam.step(&mut [0.0; 3], &[0.0; 3]).is_err());
        assert!(adam.step(&mut [0.0; 2], &[0.0; 1]).is_err());
    }

    #[test]
    fn early_stopping_waits_for_patience() {
        let mut es = EarlyStopping::new(3, 1e-5);
        assert!(!es.observe(1.0).stop);
        assert!(!es.observe(1.0).stop);
        assert!(!es.observe(1.0).stop);
        assert!(es.observe(0.999_999_9).stop);
    }

    #[test]
    fn early_stopping_never_fires_with_regular_improvement() {
        let mut es = EarlyStopping::new(2, 1e-3);
        let mut v = 1.0;
        for step in 0..100 {
            if step % 2 == 0 {
                v -= 2e-3;
            }
            assert!(!es.observe(v).stop, "stopped at {step}");
        }
    }

    #[test]
    fn split_and_batches() {
        let (train, valid) = split_validation(10, 0.2, &mut Rng::new(0)).unwrap();
        assert_eq!((train.len(), valid.len()), (8, 2));
        let mut all: Vec<usize> = train.iter().chain(&valid).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(split_validation(4, 0.2, &mut Rng::new(0)).is_err());

        let mut s = BatchSampler::new((0..7).collect(), 3, Rng::new(1));
        for _ in 0..5 {
            let mut b = s.next_batch();
            assert_eq!(b.len(), 3);
            b.sort();
            b.dedup();
            assert_eq!(b.len(), 3);
        }
        let mut whole = BatchSampler::new((0..5).collect(), 200, Rng::new(2));
        let mut b = whole.next_batch();
        b.sort();
        assert_eq!(b, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn history_csv_round_trip() {
        let h = TrainHistory {
            objective: Objective::Profile,
            records: vec![StepRecord {
                step: 0,
                train_loss: 1.0,
                train_rmse: 0.25,
                valid_rmse: 0.375,
                test_rmse: None,
                wall_ms: 1.5,
            }],
            best_step: Some(0),
            stopped_early: false,
            last_layer_refit: false,
        };
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step,train_rmse,valid_rmse,wall_ms\n"));
        let back = TrainHistory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back[0].valid_rmse, 0.375);
        assert_eq!(back[0].wall_ms, 1.5);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            validation_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
