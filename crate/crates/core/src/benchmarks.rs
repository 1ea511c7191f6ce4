//! Synthetic benchmark functions, tabular datasets, the MLP baseline and the
//! experiment drivers: the sample-size sweep and the profile-versus-direct
//! optimization comparison.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperopt::{lambda_lower, tune_last_lambda, BoConfig};
use crate::kernel::KernelConfig;
use crate::network::Architecture;
use crate::numerics::{derive_seed, Rng};
use crate::objective::PenaltyConfig;
use crate::trainer::{
    predict, select_entries, select_rows, split_validation, train_direct, train_profile, train_profile_monitored,
    Adam, BatchSampler, EarlyStopping, Monitor, TrainConfig, TrainHistory,
};

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkId {
    F1,
    F2,
    F3,
    F4,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 4] = [Self::F1, Self::F2, Self::F3, Self::F4];

    pub fn input_dim(self) -> usize {
        match self {
            Self::F1 => 3,
            Self::F2 => 10,
            Self::F3 => 4,
            Self::F4 => 6,
        }
    }

    pub fn widths(self) -> Vec<usize> {
        match self {
            Self::F1 => vec![3, 6, 6, 1],
            Self::F2 => vec![10, 10, 10, 1],
            Self::F3 => vec![4, 4, 4, 1],
            Self::F4 => vec![6, 6, 6, 6, 1],
        }
    }

    pub fn architecture(self) -> Architecture {
        Architecture::new(self.widths()).expect("benchmark widths are valid")
    }

    pub fn eval(self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::dims("benchmark input", self.input_dim(), x.len()));
        }
        let v = match self {
            Self::F1 => {
                let inner = x[0] * x[0] + x[1] * x[1] + x[2].tan().abs();
                let arg = PI / (1.0 + (x[0] * x[0] + (6.0 * x[1]).sin() + x[2] * x[2]).exp());
                let tan = arg.tan();
                if !(inner > 0.0) || tan == 0.0 {
                    return Err(Error::SingularPoint { function: "f1" });
                }
                inner.ln() + 1.0 / tan
            }
            Self::F2 => x.iter().map(|v| v * v).sum::<f64>().sin(),
            Self::F3 => {
                let a = (PI * (x[0] * x[0] + x[1] * x[1])).sin();
                let b = (PI * (x[2] * x[2] + x[3] * x[3])).sin();
                (0.5 * (a + b)).exp()
            }
            Self::F4 => (PI * (x[0] * x[0] + x[1] * x[1])).sin().exp() * (PI * x[2] * x[3]).cos(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::SingularPoint { function: self.name() })
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::F2 => "f2",
            Self::F3 => "f3",
            Self::F4 => "f4",
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown benchmark `{s}` (expected f1..f4)")))
    }
}

/// Noise standard deviation of the benchmark responses.
pub const NOISE_SD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, provenance: impl Into<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::dims("dataset responses", x.nrows(), y.len()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset entries must be finite".into()));
        }
        Ok(Self {
            x,
            y,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Writes `x1,...,xD,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        out.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.x.row(i).iter().map(f64::to_string).collect();
            row.push(self.y[i].to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a table whose last column is the response.
    pub fn read_csv<R: Read>(r: R, provenance: impl Into<String>) -> Result<Self> {
        let table = read_table(r)?;
        if table.header.len() < 2 {
            return Err(Error::MalformedData {
                row: 0,
                column: table.header.len(),
                message: "need at least one feature column and a response column".into(),
            });
        }
        let d = table.header.len() - 1;
        let n = table.rows.len();
        let x = DMatrix::from_fn(n, d, |i, j| table.rows[i][j]);
        let y = DVector::from_fn(n, |i, _| table.rows[i][d]);
        Self::new(x, y, provenance)
    }
}

/// A numeric CSV table; `row` in errors counts data rows from 1 and `column` from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table<R: Read>(r: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(Error::MalformedData {
                row,
                column: rec.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let values = rec
            .iter()
            .enumerate()
            .map(|(j, s)| match s.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::MalformedData {
                    row,
                    column: j + 1,
                    message: format!("`{s}` is not a finite number"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Empty("data rows"));
    }
    Ok(Table { header, rows })
}

/// `n` rows with inputs i.i.d. Uniform[-1, 1]^D and `y = f(x) + noise_sd · ε`.
/// Inputs on the function's singular set are redrawn.
pub fn make_dataset(id: BenchmarkId, n: usize, noise_sd: f64, rng: &mut Rng) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Empty("dataset size"));
    }
    let d = id.input_dim();
    let mut x = DMatrix::zeros(n, d);
    let mut y = DVector::zeros(n);
    let mut row = vec![0.0; d];
    for i in 0..n {
        let f = loop {
            row.iter_mut().for_each(|v| *v = rng.uniform_in(-1.0, 1.0));
            if let Ok(f) = id.eval(&row) {
                break f;
            }
        };
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
        y[i] = f + noise_sd * rng.standard_normal();
    }
    Dataset::new(x, y, format!("{id} seed {}", rng.seed()))
}

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::dims("rmse inputs", target.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::Empty("rmse inputs"));
    }
    let ss: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// Fully connected ReLU network used as the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub widths: Vec<usize>,
    /// `(weights: out × in, bias)` per layer.
    pub layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl Mlp {
    /// Same depth as `arch`, hidden widths tripled. Hidden weights are He-normal,
    /// biases zero, and the output layer starts at zero.
    pub fn for_architecture(arch: &Architecture, rng: &mut Rng) -> Self {
        let w = arch.widths();
        let mut widths = vec![w[0]];
        widths.extend(w[1..w.len() - 1].iter().map(|v| 3 * v));
        widths.push(1);
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, p)| {
                let sd = (2.0 / p[0] as f64).sqrt();
                let weights = if l == last {
                    DMatrix::zeros(p[1], p[0])
                } else {
                    DMatrix::from_fn(p[1], p[0], |_, _| sd * rng.standard_normal())
                };
                (weights, DVector::zeros(p[1]))
            })
            .collect();
        Self { widths, layers }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|(w, b)| w.len() + b.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::dims("MLP parameters", self.n_params(), p.len()));
        }
        let mut o = 0;
        for (w, b) in &mut self.layers {
            let (wl, bl) = (w.len(), b.len());
            w.as_mut_slice().copy_from_slice(&p[o..o + wl]);
            b.as_mut_slice().copy_from_slice(&p[o + wl..o + wl + bl]);
            o += wl + bl;
        }
        Ok(())
    }

    /// Activations per layer as `n × width` matrices, starting with the input.
    fn activations(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = vec![x.clone()];
        let last = self.layers.len() - 1;
        for (l, (w, b)) in self.layers.iter().enumerate() {
            let mut z = acts[l].clone() * w.transpose();
            for mut row in z.row_iter_mut() {
                row += b.transpose();
            }
            if l < last {
                z.apply(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.widths[0] {
            return Err(Error::dims("MLP input columns", self.widths[0], x.ncols()));
        }
        let out = self.activations(x).pop().expect("at least one layer");
        Ok(DVector::from_column_slice(out.as_slice()))
    }

    /// Mean squared error on the batch and its gradient in [`Mlp::params`] order.
    pub fn loss_grad(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> (f64, Vec<f64>) {
        let acts = self.activations(x);
        let n = y.len() as f64;
        let out = acts.last().expect("output");
        let resid = DMatrix::from_fn(y.len(), 1, |i, _| out[(i, 0)] - y[i]);
        let loss = resid.norm_squared() / n;
        let mut delta = resid * (2.0 / n);
        let mut grads = vec![(DMatrix::zeros(0, 0), DVector::zeros(0)); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let gw = delta.transpose() * &acts[l];
            let gb = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            if l > 0 {
                let mut back = &delta * &self.layers[l].0;
                back.zip_apply(&acts[l], |d, a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads[l] = (gw, gb);
        }
        let flat = grads.iter().flat_map(|(w, b)| w.iter().chain(b.iter()).copied()).collect();
        (loss, flat)
    }
}

/// Trains the baseline with the same split, batching, Adam and early-stopping
/// rules as the kernel network, on the plain squared loss.
pub fn train_mlp_baseline(x: &DMatrix<f64>, y: &DVector<f64>, arch: &Architecture, cfg: &TrainConfig) -> Result<Mlp> {
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
    let root = Rng::new(cfg.seed);
    let (train_rows, valid_rows) = split_validation(x.nrows(), cfg.validation_fraction, &mut root.derive(1))?;
    let mut mlp = Mlp::for_architecture(arch, &mut root.derive(2));
    let mut sampler = BatchSampler::new(train_rows, cfg.batch_size, root.derive(3));
    let (xv, yv) = (select_rows(x, &valid_rows), select_entries(y, &valid_rows));
    let mut adam = Adam::new(cfg.adam(), mlp.n_params());
    let mut stopper = EarlyStopping::new(cfg.patience, cfg.min_improvement);
    let mut best = mlp.params();
    for _ in 0..cfg.max_steps {
        let rows = sampler.next_batch();
        let (_, grads) = mlp.loss_grad(&select_rows(x, &rows), &select_entries(y, &rows));
        let valid = rmse(mlp.predict(&xv)?.as_slice(), yv.as_slice())?;
        let obs = stopper.observe(valid);
        if obs.new_best {
            best = mlp.params();
        }
        if obs.stop {
            break;
        }
        let mut p = mlp.params();
        adam.step(&mut p, &grads)?;
        mlp.set_params(&p)?;
    }
    mlp.set_params(&best)?;
    Ok(mlp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Wahkon,
    Mlp,
    /// Predicts the training-response mean.
    Mean,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Wahkon => "wahkon",
            Self::Mlp => "mlp",
            Self::Mean => "mean",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Wahkon, Self::Mlp, Self::Mean]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}` (expected wahkon, mlp or mean)")))
    }
}

/// How the last-layer penalty is chosen inside a sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyChoice {
    /// Tune `λ_L` by cross-validated Bayesian optimization.
    pub tune: bool,
    /// `λ_L = lambda_last_factor · λ_lower` when not tuning.
    pub lambda_last_factor: f64,
}

impl Default for PenaltyChoice {
    fn default() -> Self {
        Self {
            tune: true,
            lambda_last_factor: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub function: BenchmarkId,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub test_size: usize,
    pub noise_sd: f64,
    pub kernel: KernelConfig,
    pub train: TrainConfig,
    pub bo: BoConfig,
    pub penalty: PenaltyChoice,
    pub master_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            function: BenchmarkId::F3,
            sizes: vec![100, 200, 400, 800, 1600, 3200],
            replicates: 5,
            methods: vec![Method::Wahkon, Method::Mlp, Method::Mean],
            test_size: 1000,
            noise_sd: NOISE_SD,
            kernel: KernelConfig::default(),
            train: TrainConfig::default(),
            bo: BoConfig::default(),
            penalty: PenaltyChoice::default(),
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub function: BenchmarkId,
    pub n_train: usize,
    pub replicate: usize,
    pub method: Method,
    /// `None` marks a failed cell.
    pub test_rmse: Option<f64>,
    pub train_seconds: f64,
    #[serde(skip)]
    pub error: Option<String>,
}

/// Rows of a sweep; written as
/// `function,n_train,replicate,method,test_rmse,train_seconds` with
/// `test_rmse = error` for failed cells.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

pub const ERROR_MARKER: &str = "error";

impl ExperimentResult {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["function", "n_train", "replicate", "method", "test_rmse", "train_seconds"])?;
        for r in &self.rows {
            out.write_record([
                r.function.to_string(),
                r.n_train.to_string(),
                r.replicate.to_string(),
                r.method.to_string(),
                r.test_rmse.map_or_else(|| ERROR_MARKER.to_string(), |v| v.to_string()),
                r.train_seconds.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |column: usize, message: String| Error::MalformedData {
                row: i + 1,
                column,
                message,
            };
            let field = |c: usize| rec.get(c).ok_or_else(|| bad(c + 1, "missing field".into()));
            let int = |c: usize| -> Result<usize> { field(c)?.parse().map_err(|_| bad(c + 1, "expected an integer".into())) };
            let num = |c: usize| -> Result<f64> { field(c)?.parse().map_err(|_| bad(c + 1, "expected a number".into())) };
            let test_rmse = match field(4)? {
                ERROR_MARKER => None,
                _ => Some(num(4)?),
            };
            rows.push(ResultRow {
                function: field(0)?.parse().map_err(|e: Error| bad(1, e.to_string()))?,
                n_train: int(1)?,
                replicate: int(2)?,
                method: field(3)?.parse().map_err(|e: Error| bad(4, e.to_string()))?,
                test_rmse,
                error: test_rmse.is_none().then(|| ERROR_MARKER.to_string()),
                train_seconds: num(5)?,
            });
        }
        Ok(Self { rows })
    }

    /// Mean test RMSE of the successful cells for one method and size.
    pub fn mean_rmse(&self, method: Method, n_train: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.n_train == n_train)
            .filter_map(|r| r.test_rmse)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

const TAG_TRAIN: u64 = 0x7472;
const TAG_TEST: u64 = 0x7465;
const TAG_FIT: u64 = 0x6669;

/// Fits one method to a training set and returns its test RMSE.
pub fn run_method(
    method: Method,
    train: &Dataset,
    test: &Dataset,
    arch: &Architecture,
    cfg: &SweepConfig,
    seed: u64,
) -> Result<f64> {
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let pred = match method {
        Method::Mean => DVector::from_element(test.len(), train.y.mean()),
        Method::Mlp => train_mlp_baseline(&train.x, &train.y, arch, &train_cfg)?.predict(&test.x)?,
        Method::Wahkon => {
            let n = train.len();
            let s = lambda_lower(n, arch);
            let lambda_last = if cfg.penalty.tune {
                let bo = BoConfig {
                    seed: derive_seed(seed, 0xb0),
                    ..cfg.bo.clone()
                };
                tune_last_lambda(&train.x, &train.y, arch, &cfg.kernel, &train_cfg, &bo)?.lambda
            } else {
                cfg.penalty.lambda_last_factor * s
            };
            let pen = PenaltyConfig::new(s, lambda_last, n)?;
            let (model, _) = train_profile(&train.x, &train.y, arch, &cfg.kernel, &pen, &train_cfg)?;
            predict(&model, &test.x)?
        }
    };
    rmse(pred.as_slice(), test.y.as_slice())
}

/// Test RMSE for every (size, replicate, method). Replicate `r` uses one
/// test set for all sizes; every cell draws a fresh training set.
pub fn run_size_sweep(cfg: &SweepConfig) -> Result<ExperimentResult> {
    run_size_sweep_with(cfg, |_| {})
}

/// [`run_size_sweep`] reporting each finished row to `on_row`.
pub fn run_size_sweep_with<F: FnMut(&ResultRow)>(cfg: &SweepConfig, mut on_row: F) -> Result<ExperimentResult> {
    if cfg.sizes.is_empty() {
        return Err(Error::Empty("sweep sizes"));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Empty("sweep methods"));
    }
    cfg.train.validate()?;
    if cfg.penalty.tune {
        cfg.bo.validate()?;
    }
    let arch = cfg.function.architecture();
    let mut out = ExperimentResult::default();
    for replicate in 0..cfg.replicates {
        let test_seed = derive_seed(derive_seed(cfg.master_seed, TAG_TEST), replicate as u64);
        let test = make_dataset(cfg.function, cfg.test_size, cfg.noise_sd, &mut Rng::new(test_seed))?;
        for &n in &cfg.sizes {
            let cell = derive_seed(derive_seed(cfg.master_seed, n as u64), replicate as u64);
            let train = make_dataset(cfg.function, n, cfg.noise_sd, &mut Rng::new(derive_seed(cell, TAG_TRAIN)))?;
            for &method in &cfg.methods {
                let start = Instant::now();
                let result = run_method(method, &train, &test, &arch, cfg, derive_seed(cell, TAG_FIT));
                let row = ResultRow {
                    function: cfg.function,
                    n_train: n,
                    replicate,
                    method,
                    train_seconds: start.elapsed().as_secs_f64(),
                    test_rmse: result.as_ref().ok().copied(),
                    error: result.err().map(|e| e.to_string()),
                };
                on_row(&row);
                out.rows.push(row);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub function: BenchmarkId,
    pub n_train: usize,
    pub test_size: usize,
    pub noise_sd: f64,
    pub kernel: KernelConfig,
    pub train: TrainConfig,
    /// Both runs use `λ_L = lambda_last_factor · λ_lower`.
    pub lambda_last_factor: f64,
    /// A step counts as an oscillation when training RMSE rises by more than
    /// this factor and falls on the next step.
    pub oscillation_rise: f64,
    /// Stop on validation patience; when off both runs take every step and
    /// the best-validation snapshot is still returned.
    pub early_stopping: bool,
    pub seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            function: BenchmarkId::F1,
            n_train: 400,
            test_size: 1000,
            noise_sd: NOISE_SD,
            kernel: KernelConfig::default(),
            train: TrainConfig::default(),
            lambda_last_factor: 0.1,
            oscillation_rise: 1.05,
            early_stopping: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    /// `1.1 ×` the smaller of the two runs' test RMSE at their best validation step.
    pub threshold: f64,
    /// Steps needed to first reach the threshold; `max_steps + 1` when never reached.
    pub profile_steps: usize,
    pub direct_steps: usize,
    /// `direct_steps / profile_steps`.
    pub step_ratio: f64,
    pub profile_oscillations: usize,
    pub direct_oscillations: usize,
    /// Test RMSE of the returned models.
    pub profile_test_rmse: f64,
    pub direct_test_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub profile: TrainHistory,
    pub direct: TrainHistory,
    pub summary: ComparisonSummary,
}

impl Comparison {
    /// Writes `objective,step,train_rmse,valid_rmse,test_rmse,wall_ms` for both runs.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["objective", "step", "train_rmse", "valid_rmse", "test_rmse", "wall_ms"])?;
        for (name, h) in [("profile", &self.profile), ("direct", &self.direct)] {
            for r in &h.records {
                out.write_record([
                    name.to_string(),
                    r.step.to_string(),
                    r.train_rmse.to_string(),
                    r.valid_rmse.to_string(),
                    r.test_rmse.map_or_else(String::new, |v| v.to_string()),
                    r.wall_ms.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// One row of the paired-history CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub objective: String,
    pub step: usize,
    pub train_rmse: f64,
    pub valid_rmse: f64,
    pub test_rmse: Option<f64>,
    pub wall_ms: f64,
}

impl Comparison {
    pub fn read_csv<R: Read>(r: R) -> Result<Vec<ComparisonRow>> {
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(r).deserialize() {
            rows.push(row?);
        }
        Ok(rows)
    }
}

/// Steps `t` where `v[t] > rise · v[t-1]` and `v[t+1] < v[t]`.
pub fn oscillation_count(values: &[f64], rise: f64) -> usize {
    (1..values.len().saturating_sub(1))
        .filter(|&t| values[t] > rise * values[t - 1] && values[t + 1] < values[t])
        .count()
}

/// Number of steps until `values` first drops to `threshold`, or `censored`.
pub fn steps_to_threshold(values: &[f64], threshold: f64, censored: usize) -> usize {
    values.iter().position(|&v| v <= threshold).map_or(censored, |t| t + 1)
}

/// Trains the profile and direct variants with identical data, seeds and
/// configuration and compares how fast their test RMSE converges.
pub fn compare_objectives(cfg: &CompareConfig) -> Result<Comparison> {
    if cfg.n_train < 100 {
        return Err(Error::InsufficientData(format!(
            "comparison needs at least 100 training rows, got {}",
            cfg.n_train
        )));
    }
    let root = Rng::new(cfg.seed);
    let train = make_dataset(cfg.function, cfg.n_train, cfg.noise_sd, &mut root.derive(TAG_TRAIN))?;
    let test = make_dataset(cfg.function, cfg.test_size, cfg.noise_sd, &mut root.derive(TAG_TEST))?;
    let arch = cfg.function.architecture();
    let s = lambda_lower(cfg.n_train, &arch);
    let pen = PenaltyConfig::new(s, cfg.lambda_last_factor * s, cfg.n_train)?;
    let mut train_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, TAG_FIT),
        ..cfg.train.clone()
    };
    if !cfg.early_stopping {
        train_cfg.patience = train_cfg.max_steps.max(1) + 1;
    }
    let monitor = Monitor { x: &test.x, y: &test.y };
    let (pm, ph) = train_profile_monitored(&train.x, &train.y, &arch, &cfg.kernel, &pen, &train_cfg, Some(monitor))?;
    let (dm, dh) = train_direct(&train.x, &train.y, &arch, &cfg.kernel, &pen, &train_cfg, Some(monitor))?;

    let curve = |h: &TrainHistory| -> Vec<f64> { h.records.iter().map(|r| r.test_rmse.unwrap_or(f64::NAN)).collect() };
    let at_best = |h: &TrainHistory| h.best_step.map_or(f64::INFINITY, |s| h.records[s].test_rmse.unwrap_or(f64::NAN));
    let threshold = 1.1 * at_best(&ph).min(at_best(&dh));
    let censored = cfg.train.max_steps + 1;
    let profile_steps = steps_to_threshold(&curve(&ph), threshold, censored);
    let direct_steps = steps_to_threshold(&curve(&dh), threshold, censored);
    let train_curve = |h: &TrainHistory| -> Vec<f64> { h.records.iter().map(|r| r.train_rmse).collect() };
    let summary = ComparisonSummary {
        threshold,
        profile_steps,
        direct_steps,
        step_ratio: direct_steps as f64 / profile_steps.max(1) as f64,
        profile_oscillations: oscillation_count(&train_curve(&ph), cfg.oscillation_rise),
        direct_oscillations: oscillation_count(&train_curve(&dh), cfg.oscillation_rise),
        profile_test_rmse: rmse(predict(&pm, &test.x)?.as_slice(), test.y.as_slice())?,
        direct_test_rmse: rmse(predict(&dm, &test.x)?.as_slice(), test.y.as_slice())?,
    };
    Ok(Comparison {
        profile: ph,
        direct: dh,
        summary,
    })
}
