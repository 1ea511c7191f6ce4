//! Layered run configuration: built-in defaults, then a TOML file, then
//! `--set key=value` flags, then `--seed`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use wahkon::benchmarks::{BenchmarkId, CompareConfig, Method, PenaltyChoice, SweepConfig, NOISE_SD};
use wahkon::hyperopt::BoConfig;
use wahkon::kernel::{KernelConfig, LINK_LENGTHSCALE, PRIOR_LENGTHSCALE};
use wahkon::network::{Architecture, GridSpec};
use wahkon::numerics::derive_seed;
use wahkon::prior::PriorConfig;
use wahkon::trainer::TrainConfig;

use crate::error::CliError;

/// Seed tag of the Bayesian-optimization stream under the master seed.
const TAG_BO: u64 = 0xb0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub train: TrainSection,
    pub model: ModelSection,
    pub bo: BoSection,
    pub benchmark: BenchmarkSection,
    pub compare: CompareSection,
    pub prior: PriorSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train: TrainSection::default(),
            model: ModelSection::default(),
            bo: BoSection::default(),
            benchmark: BenchmarkSection::default(),
            compare: CompareSection::default(),
            prior: PriorSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub patience: usize,
    pub min_improvement: f64,
    pub validation_fraction: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub tau_init: f64,
    pub grid_size: usize,
    pub grid_expansion: f64,
    /// First-layer grid span; empty takes the range of the training inputs.
    pub grid_input_range: Vec<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        let range = t.grid.input_range.map_or_else(Vec::new, |(lo, hi)| vec![lo, hi]);
        Self {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_steps: t.max_steps,
            patience: t.patience,
            min_improvement: t.min_improvement,
            validation_fraction: t.validation_fraction,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_epsilon: t.adam_epsilon,
            tau_init: t.tau_init,
            grid_size: t.grid.size,
            grid_expansion: t.grid.expansion,
            grid_input_range: range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Layer widths `D_0..D_L`; empty means `(D, 2D + 1, 1)` for `D` input columns.
    pub widths: Vec<usize>,
    pub lengthscale: f64,
    /// Explicit `λ_lower`; unset applies the `n^(-0.8) · #links` rule.
    pub lambda_lower: Option<f64>,
    /// Explicit `λ_L`; unset uses `lambda_last_factor · λ_lower`.
    pub lambda_last: Option<f64>,
    pub lambda_last_factor: f64,
    /// Choose `λ_L` by cross-validated Bayesian optimization.
    pub tune: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            widths: Vec::new(),
            lengthscale: LINK_LENGTHSCALE,
            lambda_lower: None,
            lambda_last: None,
            lambda_last_factor: PenaltyChoice::default().lambda_last_factor,
            tune: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoSection {
    pub total_evals: usize,
    pub initial_random: usize,
    pub bo_iters: usize,
    pub range_low: f64,
    pub range_high: f64,
    pub folds: usize,
    pub candidate_grid_size: usize,
    pub surrogate_noise: f64,
}

impl Default for BoSection {
    fn default() -> Self {
        let b = BoConfig::default();
        Self {
            total_evals: b.total_evals,
            initial_random: b.initial_random,
            bo_iters: b.bo_iters,
            range_low: b.range_low,
            range_high: b.range_high,
            folds: b.folds,
            candidate_grid_size: b.candidate_grid_size,
            surrogate_noise: b.surrogate_noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub function: String,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<String>,
    pub test_size: usize,
    pub noise_sd: f64,
    pub tune: bool,
    pub lambda_last_factor: f64,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        let s = SweepConfig::default();
        Self {
            function: s.function.to_string(),
            sizes: s.sizes,
            replicates: s.replicates,
            methods: s.methods.iter().map(|m| m.to_string()).collect(),
            test_size: s.test_size,
            noise_sd: s.noise_sd,
            tune: s.penalty.tune,
            lambda_last_factor: s.penalty.lambda_last_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub function: String,
    pub n_train: usize,
    pub test_size: usize,
    pub noise_sd: f64,
    pub lambda_last_factor: f64,
    pub oscillation_rise: f64,
    pub early_stopping: bool,
}

impl Default for CompareSection {
    fn default() -> Self {
        let c = CompareConfig::default();
        Self {
            function: c.function.to_string(),
            n_train: c.n_train,
            test_size: c.test_size,
            noise_sd: NOISE_SD,
            lambda_last_factor: c.lambda_last_factor,
            oscillation_rise: c.oscillation_rise,
            early_stopping: c.early_stopping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub widths: Vec<usize>,
    pub lengthscale: f64,
    /// Per-layer `τ_l`; unset uses `1 / D_{l-1}`.
    pub taus: Option<Vec<f64>>,
    pub n_points: usize,
    pub n_draws: usize,
    pub shrinkage: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        let p = PriorConfig::default();
        Self {
            widths: p.widths,
            lengthscale: PRIOR_LENGTHSCALE,
            taus: p.taus,
            n_points: p.n_points,
            n_draws: p.n_draws,
            shrinkage: p.shrinkage,
        }
    }
}

/// Keys without a default value, listed in `--help` as unset.
const UNSET_KEYS: &[(&str, &str)] = &[
    ("model.lambda_lower", "unset: n^(-0.8) * number of links"),
    ("model.lambda_last", "unset: lambda_last_factor * lambda_lower"),
    ("prior.taus", "unset: 1 / D_(l-1) per layer"),
];

/// Resolves the layered configuration.
pub fn resolve(file: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut table = defaults_table();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let parsed: Table = toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {} is not valid TOML: {e}", path.display())))?;
        merge(&mut table, parsed);
    }
    for assignment in sets {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--set expects key=value, got `{assignment}`")))?;
        set_path(&mut table, key.trim(), parse_value(raw.trim()))?;
    }
    if let Some(seed) = seed {
        table.insert("seed".into(), Value::Integer(seed_to_toml(seed)?));
    }
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Input(format!("invalid configuration: {e}")))?;
    Ok(cfg)
}

fn seed_to_toml(seed: u64) -> Result<i64, CliError> {
    i64::try_from(seed).map_err(|_| CliError::Input(format!("seed {seed} exceeds {}", i64::MAX)))
}

fn defaults_table() -> Table {
    match Value::try_from(RunConfig::default()) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("default config serializes to a table"),
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// A TOML literal when it parses as one, a bare string otherwise.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for s in sections {
        cur = match cur.get_mut(*s) {
            Some(Value::Table(t)) => t,
            _ => return Err(CliError::Input(format!("unknown config key `{key}`"))),
        };
    }
    let optional = UNSET_KEYS.iter().any(|(k, _)| *k == key);
    if !optional && !cur.contains_key(*last) {
        return Err(CliError::Input(format!("unknown config key `{key}`")));
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// `key = default` lines for the given sections (and the master seed).
pub fn help_listing(sections: &[&str]) -> String {
    let table = defaults_table();
    let mut lines = vec!["Config keys (set in --config TOML or with --set key=value):".to_string()];
    lines.push(format!("  seed = {}", table["seed"]));
    for s in sections {
        if let Some(Value::Table(t)) = table.get(*s) {
            for (k, v) in t {
                lines.push(format!("  {s}.{k} = {v}"));
            }
        }
        for (k, note) in UNSET_KEYS.iter().filter(|(k, _)| k.starts_with(&format!("{s}."))) {
            lines.push(format!("  {k} ({note})"));
        }
    }
    lines.join("\n")
}

fn input(e: wahkon::Error) -> CliError {
    CliError::Input(e.to_string())
}

impl RunConfig {
    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let t = &self.train;
        let input_range = match t.grid_input_range.as_slice() {
            [] => None,
            [lo, hi] if lo < hi => Some((*lo, *hi)),
            _ => {
                return Err(CliError::Input(
                    "train.grid_input_range must be empty or [lo, hi] with lo < hi".into(),
                ))
            }
        };
        if !(t.grid_expansion >= 0.0 && t.grid_expansion.is_finite()) {
            return Err(CliError::Input("train.grid_expansion must be nonnegative".into()));
        }
        let cfg = TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_steps: t.max_steps,
            patience: t.patience,
            min_improvement: t.min_improvement,
            validation_fraction: t.validation_fraction,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_epsilon: t.adam_epsilon,
            tau_init: t.tau_init,
            grid: GridSpec {
                size: t.grid_size,
                input_range,
                expansion: t.grid_expansion,
                ..GridSpec::default()
            },
            seed: self.seed,
        };
        cfg.validate().map_err(input)?;
        Ok(cfg)
    }

    pub fn bo_config(&self) -> Result<BoConfig, CliError> {
        let b = &self.bo;
        let cfg = BoConfig {
            total_evals: b.total_evals,
            initial_random: b.initial_random,
            bo_iters: b.bo_iters,
            range_low: b.range_low,
            range_high: b.range_high,
            folds: b.folds,
            candidate_grid_size: b.candidate_grid_size,
            surrogate_noise: b.surrogate_noise,
            seed: derive_seed(self.seed, TAG_BO),
        };
        cfg.validate().map_err(input)?;
        Ok(cfg)
    }

    pub fn kernel(&self) -> Result<KernelConfig, CliError> {
        KernelConfig::new(self.model.lengthscale).map_err(input)
    }

    /// The model architecture for data with `input_dim` feature columns.
    pub fn architecture(&self, input_dim: usize) -> Result<Architecture, CliError> {
        let widths = if self.model.widths.is_empty() {
            vec![input_dim, 2 * input_dim + 1, 1]
        } else {
            self.model.widths.clone()
        };
        if widths[0] != input_dim {
            return Err(CliError::Input(format!(
                "model.widths starts with {} but the data has {input_dim} feature columns",
                widths[0]
            )));
        }
        Architecture::new(widths).map_err(input)
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let b = &self.benchmark;
        let methods = b
            .methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(input)?;
        if b.sizes.is_empty() || methods.is_empty() || b.replicates == 0 || b.test_size == 0 {
            return Err(CliError::Input(
                "benchmark needs nonempty sizes and methods, and positive replicates and test_size".into(),
            ));
        }
        check_noise(b.noise_sd, "benchmark.noise_sd")?;
        check_factor(b.lambda_last_factor, "benchmark.lambda_last_factor")?;
        Ok(SweepConfig {
            function: parse_function(&b.function)?,
            sizes: b.sizes.clone(),
            replicates: b.replicates,
            methods,
            test_size: b.test_size,
            noise_sd: b.noise_sd,
            kernel: self.kernel()?,
            train: self.train_config()?,
            bo: self.bo_config()?,
            penalty: PenaltyChoice {
                tune: b.tune,
                lambda_last_factor: b.lambda_last_factor,
            },
            master_seed: self.seed,
        })
    }

    pub fn compare_config(&self) -> Result<CompareConfig, CliError> {
        let c = &self.compare;
        check_noise(c.noise_sd, "compare.noise_sd")?;
        check_factor(c.lambda_last_factor, "compare.lambda_last_factor")?;
        if !(c.oscillation_rise >= 1.0) {
            return Err(CliError::Input("compare.oscillation_rise must be at least 1".into()));
        }
        if c.test_size == 0 {
            return Err(CliError::Input("compare.test_size must be positive".into()));
        }
        Ok(CompareConfig {
            function: parse_function(&c.function)?,
            n_train: c.n_train,
            test_size: c.test_size,
            noise_sd: c.noise_sd,
            kernel: self.kernel()?,
            train: self.train_config()?,
            lambda_last_factor: c.lambda_last_factor,
            oscillation_rise: c.oscillation_rise,
            early_stopping: c.early_stopping,
            seed: self.seed,
        })
    }

    pub fn prior_config(&self) -> Result<PriorConfig, CliError> {
        let p = &self.prior;
        let cfg = PriorConfig {
            widths: p.widths.clone(),
            kernel: KernelConfig::new(p.lengthscale).map_err(input)?,
            taus: p.taus.clone(),
            n_points: p.n_points,
            n_draws: p.n_draws,
            shrinkage: p.shrinkage,
            seed: self.seed,
        };
        cfg.validate().map_err(input)?;
        Ok(cfg)
    }
}

fn parse_function(name: &str) -> Result<BenchmarkId, CliError> {
    name.parse().map_err(input)
}

fn check_noise(v: f64, key: &str) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{key} must be nonnegative")))
    }
}

fn check_factor(v: f64, key: &str) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{key} must be positive")))
    }
}
