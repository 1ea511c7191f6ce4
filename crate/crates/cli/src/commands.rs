//! Command implementations. Each command resolves its configuration, creates
//! a fresh run directory, writes its artifacts and a manifest, and returns
//! the run directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use wahkon::benchmarks::{compare_objectives, read_table, run_size_sweep_with, Dataset, Method};
use wahkon::hyperopt::{lambda_lower, tune_last_lambda};
use wahkon::objective::PenaltyConfig;
use wahkon::prior::{layer_moment_check, mahalanobis_diagnostics, sample_prior, write_d2_csv, write_qq_csv};
use wahkon::trainer::{predict, train_profile};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::model_file::{ModelFile, TrainingInfo};

/// Creates `<out>/<command>-seed<seed>`, or the first free `-2`, `-3`, ...
/// variant, so that an earlier run is never touched.
pub fn create_run_dir(out: &Path, command: &str, seed: u64) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(format!("cannot create {}", out.display()), e))?;
    let base = format!("{command}-seed{seed}");
    for attempt in 1.. {
        let name = if attempt == 1 { base.clone() } else { format!("{base}-{attempt}") };
        let dir = out.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::io(format!("cannot create {}", dir.display()), e)),
        }
    }
    unreachable!("unbounded attempts")
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    inputs: Vec<(String, String)>,
    outputs: Vec<String>,
    config: &'a RunConfig,
}

struct Run<'a> {
    command: &'static str,
    dir: PathBuf,
    cfg: &'a RunConfig,
    inputs: Vec<(String, String)>,
    outputs: Vec<String>,
}

impl<'a> Run<'a> {
    fn start(command: &'static str, out: &Path, cfg: &'a RunConfig) -> Result<Self, CliError> {
        Ok(Self {
            command,
            dir: create_run_dir(out, command, cfg.seed)?,
            cfg,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    fn input(&mut self, role: &str, path: &Path) {
        self.inputs.push((role.to_string(), path.display().to_string()));
    }

    fn file(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        self.outputs.push(name.to_string());
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| CliError::io(format!("cannot create {}", path.display()), e))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        let path = self.dir.join(name);
        self.outputs.push(name.to_string());
        fs::write(&path, text).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
    }

    fn finish(mut self) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.cfg.seed,
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
            config: self.cfg,
        };
        self.json("manifest.json", &manifest)?;
        Ok(self.dir)
    }
}

fn write_err(e: wahkon::Error) -> CliError {
    CliError::Input(format!("cannot write output: {e}"))
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(format!("cannot open {}", path.display()), e))?;
    Dataset::read_csv(file, path.display().to_string()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct PenaltyReport {
    lambda_lower: f64,
    lambda_last: f64,
    tuned: bool,
}

pub fn train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let ds = load_dataset(data)?;
    let arch = cfg.architecture(ds.dim())?;
    let kernel = cfg.kernel()?;
    let train_cfg = cfg.train_config()?;
    let n = ds.len();
    let s = match cfg.model.lambda_lower {
        Some(v) if v > 0.0 && v.is_finite() => v,
        Some(v) => return Err(CliError::Input(format!("model.lambda_lower = {v} must be positive"))),
        None => lambda_lower(n, &arch),
    };
    let bo = cfg.model.tune.then(|| cfg.bo_config()).transpose()?;
    let mut run = Run::start("train", out, cfg)?;
    run.input("data", data);

    let lambda_last = if let Some(bo) = bo {
        let tuned = tune_last_lambda(&ds.x, &ds.y, &arch, &kernel, &train_cfg, &bo).map_err(CliError::from_run)?;
        tuned.write_csv(run.file("tune_log.csv")?).map_err(write_err)?;
        tuned.lambda
    } else {
        match cfg.model.lambda_last {
            Some(v) if v > 0.0 && v.is_finite() => v,
            Some(v) => return Err(CliError::Input(format!("model.lambda_last = {v} must be positive"))),
            None => cfg.model.lambda_last_factor * s,
        }
    };
    let pen = PenaltyConfig::new(s, lambda_last, n).map_err(CliError::from_run)?;
    let (model, history) = train_profile(&ds.x, &ds.y, &arch, &kernel, &pen, &train_cfg).map_err(CliError::from_run)?;
    ModelFile::from_model(&model, TrainingInfo::from_history(n, &history))?.save(&run.dir.join("model.json"))?;
    run.outputs.push("model.json".into());
    history.write_csv(run.file("history.csv")?).map_err(write_err)?;
    run.json(
        "penalties.json",
        &PenaltyReport {
            lambda_lower: s,
            lambda_last,
            tuned: cfg.model.tune,
        },
    )?;
    println!(
        "trained {} steps (best {:?}), lambda_lower = {s}, lambda_last = {lambda_last}",
        history.records.len(),
        history.best_step
    );
    run.finish()
}

/// Feature matrix of a prediction CSV: exactly `dim` columns, or `dim + 1`
/// with the last column taken as a response and ignored.
fn prediction_inputs(path: &Path, dim: usize) -> Result<DMatrix<f64>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(format!("cannot open {}", path.display()), e))?;
    let table = read_table(file).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let cols = table.rows[0].len();
    if cols != dim && cols != dim + 1 {
        return Err(CliError::Input(format!(
            "{}: model expects {dim} feature columns, file has {cols}",
            path.display()
        )));
    }
    Ok(DMatrix::from_fn(table.rows.len(), dim, |i, k| table.rows[i][k]))
}

pub fn predict_cmd(cfg: &RunConfig, model_path: &Path, data: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let model = ModelFile::load(model_path)?.to_model()?;
    let x = prediction_inputs(data, model.architecture.input_dim())?;
    let yhat = predict(&model, &x).map_err(CliError::from_run)?;
    let mut run = Run::start("predict", out, cfg)?;
    run.input("model", model_path);
    run.input("data", data);
    write_predictions(run.file("predictions.csv")?, &yhat)?;
    println!("wrote {} predictions", yhat.len());
    run.finish()
}

fn write_predictions<W: std::io::Write>(w: W, yhat: &DVector<f64>) -> Result<(), CliError> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| CliError::Input(format!("cannot write predictions: {e}"));
    out.write_record(["yhat"]).map_err(err)?;
    for v in yhat.iter() {
        out.write_record([v.to_string()]).map_err(err)?;
    }
    out.flush().map_err(|e| CliError::io("cannot write predictions", e))
}

pub fn benchmark(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let sweep = cfg.sweep_config()?;
    let mut run = Run::start("benchmark", out, cfg)?;
    let result = run_size_sweep_with(&sweep, |row| match row.test_rmse {
        Some(v) => eprintln!("n={} rep={} {}: rmse {v:.4}", row.n_train, row.replicate, row.method),
        None => eprintln!(
            "n={} rep={} {}: failed ({})",
            row.n_train,
            row.replicate,
            row.method,
            row.error.as_deref().unwrap_or("unknown")
        ),
    })
    .map_err(CliError::from_run)?;
    result.write_csv(run.file("results.csv")?).map_err(write_err)?;
    for &n in &sweep.sizes {
        let cells: Vec<String> = sweep
            .methods
            .iter()
            .map(|&m: &Method| match result.mean_rmse(m, n) {
                Some(v) => format!("{m} {v:.4}"),
                None => format!("{m} n/a"),
            })
            .collect();
        println!("n={n}: {}", cells.join(", "));
    }
    run.finish()
}

pub fn compare(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let ccfg = cfg.compare_config()?;
    let mut run = Run::start("compare", out, cfg)?;
    let cmp = compare_objectives(&ccfg).map_err(CliError::from_run)?;
    cmp.write_csv(run.file("comparison.csv")?).map_err(write_err)?;
    run.json("summary.json", &cmp.summary)?;
    let s = &cmp.summary;
    println!(
        "steps to threshold: profile {} direct {} (ratio {:.2}); oscillations: profile {} direct {}",
        s.profile_steps, s.direct_steps, s.step_ratio, s.profile_oscillations, s.direct_oscillations
    );
    run.finish()
}

#[derive(Serialize)]
struct TuneReport {
    lambda_last: f64,
    cv_rmse: f64,
    lambda_lower: f64,
    range: (f64, f64),
}

pub fn tune(cfg: &RunConfig, data: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let ds = load_dataset(data)?;
    let arch = cfg.architecture(ds.dim())?;
    let kernel = cfg.kernel()?;
    let train_cfg = cfg.train_config()?;
    let bo = cfg.bo_config()?;
    let mut run = Run::start("tune", out, cfg)?;
    run.input("data", data);
    let result = tune_last_lambda(&ds.x, &ds.y, &arch, &kernel, &train_cfg, &bo).map_err(CliError::from_run)?;
    result.write_csv(run.file("tune_log.csv")?).map_err(write_err)?;
    run.json(
        "tune.json",
        &TuneReport {
            lambda_last: result.lambda,
            cv_rmse: result.cv_rmse,
            lambda_lower: lambda_lower(ds.len(), &arch),
            range: result.range,
        },
    )?;
    println!("lambda_last = {} (cv rmse {})", result.lambda, result.cv_rmse);
    run.finish()
}

#[derive(Serialize)]
struct LayerDiagnostics {
    layer: usize,
    dof: usize,
    ks_distance: f64,
    fraction_below_50: f64,
    fraction_above_150: f64,
    jitter_applied: f64,
}

pub fn prior(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    let pcfg = cfg.prior_config()?;
    let draws = sample_prior(&pcfg, &pcfg.inputs()).map_err(CliError::from_run)?;
    let reports = (1..=pcfg.depth())
        .map(|l| mahalanobis_diagnostics(&draws, l, None, pcfg.shrinkage))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::from_run)?;
    let moments = layer_moment_check(&draws, &pcfg).map_err(CliError::from_run)?;
    let mut run = Run::start("prior", out, cfg)?;
    write_d2_csv(&reports, run.file("d2.csv")?).map_err(write_err)?;
    write_qq_csv(&reports, run.file("qq.csv")?).map_err(write_err)?;
    let mut mw = csv::Writer::from_writer(run.file("moments.csv")?);
    for m in &moments {
        mw.serialize(m).map_err(|e| CliError::Input(format!("cannot write moments: {e}")))?;
    }
    mw.flush().map_err(|e| CliError::io("cannot write moments", e))?;
    drop(mw);
    let diag: Vec<LayerDiagnostics> = reports
        .iter()
        .map(|r| LayerDiagnostics {
            layer: r.layer,
            dof: r.dof,
            ks_distance: r.ks_distance,
            fraction_below_50: r.fraction_below_50,
            fraction_above_150: r.fraction_above_150,
            jitter_applied: r.jitter_applied,
        })
        .collect();
    run.json("diagnostics.json", &diag)?;
    for d in &diag {
        println!(
            "layer {}: KS {:.3}, d2<50 {:.3}, d2>150 {:.3}",
            d.layer, d.ks_distance, d.fraction_below_50, d.fraction_above_150
        );
    }
    run.finish()
}
