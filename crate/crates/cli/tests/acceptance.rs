//! End-to-end acceptance checks, one line per criterion. Exits nonzero when
//! any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use wahkon::benchmarks::{compare_objectives, run_size_sweep_with, BenchmarkId, CompareConfig, Method, SweepConfig};
use wahkon::hyperopt::{bayes_opt, lambda_lower, tune_last_lambda, BoConfig, Phase};
use wahkon::kernel::{linspace, KernelConfig};
use wahkon::network::{
    forward, init_links, link_eval_grid, link_eval_representer, rkhs_norm_sq_grid, rkhs_norm_sq_representer,
    Architecture, Centers, GridSpec, LinkLayer, LinkTensor, RepresenterBank,
};
use wahkon::numerics::Rng;
use wahkon::objective::{last_layer_ridge, profile_grad, profile_loss, PenaltyConfig};
use wahkon::prior::{
    calibrated_taus, layer_moment_check, mahalanobis_diagnostics, map_objective_identity_check, sample_prior,
    PriorConfig,
};
use wahkon::trainer::{predict, train_profile, TrainConfig};
use wahkon_cli::model_file::ModelFile;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_inputs(rng: &mut Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.uniform_in(-1.0, 1.0))
}

fn random_response(rng: &mut Rng, x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(x.nrows(), |i, _| {
        let s: f64 = x.row(i).iter().sum();
        (2.0 * s).sin() + 0.2 * rng.standard_normal()
    })
}

fn gradient_check() -> Check {
    let kernel = KernelConfig::default();
    let mut worst = 0.0f64;
    for inst in 0..10u64 {
        let mut rng = Rng::new(100 + inst);
        let widths = if inst % 2 == 0 { vec![2, 3, 1] } else { vec![3, 4, 4, 1] };
        let arch = Architecture::new(widths.clone()).unwrap();
        let n = 20 + (inst as usize % 11);
        let x = random_inputs(&mut rng, n, widths[0]);
        let y = random_response(&mut rng, &x);
        let mut layers = init_links(&mut rng, &arch, &kernel, &GridSpec::default(), 1.0, &x, arch.depth() - 1)
            .unwrap()
            .layers;
        let pen = PenaltyConfig::new(rng.uniform_in(0.005, 0.05), rng.uniform_in(0.01, 0.1), n).unwrap();
        let (_, grads) = profile_grad(&layers, &x, &y, &kernel, &pen).map_err(|e| e.to_string())?;
        for l in 0..layers.len() {
            for p in 0..layers[l].coeffs.len() {
                let orig = layers[l].coeffs.as_slice()[p];
                let h = 1e-5 * orig.abs().max(1.0);
                layers[l].coeffs.as_mut_slice()[p] = orig + h;
                let up = profile_loss(&layers, &x, &y, &kernel, &pen).unwrap().value;
                layers[l].coeffs.as_mut_slice()[p] = orig - h;
                let down = profile_loss(&layers, &x, &y, &kernel, &pen).unwrap().value;
                layers[l].coeffs.as_mut_slice()[p] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads[l].as_slice()[p];
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
    }
    ensure(worst <= 1e-5, format!("max relative error {worst:.2e} (limit 1e-5)"))
}

/// Minimizes `‖y - Σ_k Q_k c_k‖² + μ Σ_k c_kᵀ Q_k c_k` over the stacked
/// `c = (c_1..c_D)` with a fully pivoted LU solve of the normal equations.
fn joint_last_layer_minimum(grams: &[DMatrix<f64>], y: &DVector<f64>, mu: f64) -> f64 {
    let n = y.len();
    let d = grams.len();
    let mut a = DMatrix::zeros(n, n * d);
    let mut b = DMatrix::zeros(n * d, n * d);
    for (k, q) in grams.iter().enumerate() {
        a.view_mut((0, k * n), (n, n)).copy_from(q);
        b.view_mut((k * n, k * n), (n, n)).copy_from(q);
    }
    let h = a.transpose() * &a + &b * mu;
    let rhs = a.transpose() * y;
    let c = h.full_piv_lu().solve(&rhs).expect("normal equations are nonsingular");
    let r = y - &a * &c;
    r.norm_squared() + mu * (c.transpose() * &b * &c)[(0, 0)]
}

fn profile_oracle() -> Check {
    let kernel = KernelConfig::default();
    let mut worst = 0.0f64;
    for inst in 0..20u64 {
        let mut rng = Rng::new(200 + inst);
        let widths = if inst % 2 == 0 { vec![2, 3, 1] } else { vec![2, 2, 2, 1] };
        let arch = Architecture::new(widths.clone()).unwrap();
        let n = 1 + (inst as usize % 5);
        let x = random_inputs(&mut rng, n, widths[0]);
        let y = random_response(&mut rng, &x);
        let layers = init_links(&mut rng, &arch, &kernel, &GridSpec::default(), 1.0, &x, arch.depth() - 1)
            .unwrap()
            .layers;
        let pen = PenaltyConfig::new(0.03, rng.uniform_in(0.05, 0.5), n).unwrap();
        let eval = profile_loss(&layers, &x, &y, &kernel, &pen).map_err(|e| e.to_string())?;
        let z = forward(&layers, &kernel, &x).unwrap().outputs.last().clone();
        let grams: Vec<DMatrix<f64>> = (0..z.ncols())
            .map(|k| {
                let col: Vec<f64> = z.column(k).iter().copied().collect();
                DMatrix::from_fn(n, n, |i, j| kernel.eval(col[i], col[j]))
            })
            .collect();
        let oracle = joint_last_layer_minimum(&grams, &y, pen.ridge_shift()) + eval.penalty;
        worst = worst.max((eval.value - oracle).abs() / oracle.abs().max(1e-300));
    }

    // Hand-checkable closed forms: n = 1 gives 2, n = 2 with all-ones K gives 2/3.
    let one = nalgebra::dmatrix![1.0];
    let v1 = last_layer_ridge(&wahkon::numerics::SpdMatrix::new(one).unwrap(), &DVector::from_vec(vec![2.0]), 1.0, 1)
        .unwrap()
        .value;
    let zero = LinkLayer::new(Centers::Shared(linspace(-1.0, 1.0, 9)), LinkTensor::zeros(9, 1, 1)).unwrap();
    let x2 = nalgebra::dmatrix![0.3; -0.6];
    let pen2 = PenaltyConfig::new(0.1, 0.5, 2).unwrap();
    let v2 = profile_loss(&[zero.clone()], &x2, &DVector::from_vec(vec![1.0, 1.0]), &kernel, &pen2)
        .unwrap()
        .value;
    let pen1 = PenaltyConfig::new(0.1, 1.0, 1).unwrap();
    let v1p = profile_loss(&[zero], &nalgebra::dmatrix![0.2], &DVector::from_vec(vec![2.0]), &kernel, &pen1)
        .unwrap()
        .value;
    let closed = (v1 - 2.0).abs() <= 1e-15 && (v1p - 2.0).abs() <= 1e-15 && (v2 - 2.0 / 3.0).abs() <= 1e-15;
    ensure(
        worst <= 1e-6 && closed,
        format!("oracle max rel diff {worst:.2e} (limit 1e-6); closed forms {v1}, {v1p}, {v2}"),
    )
}

fn representer_grid_identity() -> Check {
    let kernel = KernelConfig::default();
    let mut rng = Rng::new(300);
    let n = 12;
    let x = random_inputs(&mut rng, n, 1);
    let pts: Vec<f64> = x.column(0).iter().copied().collect();
    let data: Vec<f64> = (0..n * 3).map(|_| rng.standard_normal()).collect();
    let coeffs = LinkTensor::from_vec(n, 3, 1, data).unwrap();
    let grid = LinkLayer::new(Centers::Shared(pts.clone()), coeffs.clone()).unwrap();
    let rep = RepresenterBank::build(&kernel, &x, vec![coeffs.clone()]).unwrap();
    let probe = DMatrix::from_fn(25, 1, |i, _| -1.2 + 0.1 * i as f64);
    let mut worst = 0.0f64;
    for input in [&x, &probe] {
        let a = grid.forward(&kernel, input).unwrap().0;
        let b = rep.forward(&kernel, input).unwrap().outputs.last().clone();
        worst = worst.max((a - b).amax());
    }
    worst = worst.max((grid.norm_sq_sum(&kernel) - rep.layers[0].norm_sq_sum(&kernel)).abs());
    let kuu = kernel.grid_gram(&pts);
    let q = rep.layers[0].center_gram(&kernel, 0);
    for j in 0..3 {
        let c = coeffs.link(j, 0);
        worst = worst.max((rkhs_norm_sq_grid(&kuu, c).unwrap() - rkhs_norm_sq_representer(&q, c).unwrap()).abs());
        for &t in &[-0.9, -0.1, 0.45, 1.3] {
            let g = link_eval_grid(&kernel, &pts, c, t).unwrap();
            let r = link_eval_representer(&kernel, rep.layers[0].centers.for_input(0), c, t).unwrap();
            worst = worst.max((g - r).abs());
        }
    }
    ensure(worst <= 1e-10, format!("max abs difference {worst:.2e} (limit 1e-10)"))
}

fn prior_moments() -> Check {
    let cfg = PriorConfig {
        widths: vec![4, 4, 4, 4],
        n_points: 20,
        n_draws: 10_000,
        seed: 4,
        ..PriorConfig::default()
    };
    let draws = sample_prior(&cfg, &cfg.inputs()).map_err(|e| e.to_string())?;
    let moments = layer_moment_check(&draws, &cfg).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    let mut ok = true;
    for m in moments.iter().filter(|m| m.layer == 1 || m.layer == 3) {
        ok &= m.within(3.0);
        detail.push(format!(
            "layer {}: mean {:.4} (se {:.4}), var {:.4} vs {:.1} (se {:.4})",
            m.layer, m.mean, m.mean_se, m.variance, m.expected_variance, m.variance_se
        ));
    }
    ensure(ok, detail.join("; "))
}

fn map_calibration() -> Check {
    let kernel = KernelConfig::default();
    let mut rng = Rng::new(500);
    let arch = Architecture::new(vec![2, 3, 3, 1]).unwrap();
    let n = 25;
    let x = random_inputs(&mut rng, n, 2);
    let y = random_response(&mut rng, &x);
    let sigma_sq = 0.04;
    let pen = PenaltyConfig::new(0.02, 0.07, n).unwrap();
    let taus = calibrated_taus(sigma_sq, n, &pen, arch.depth()).unwrap();
    let points: Vec<Vec<LinkLayer>> = (0..10)
        .map(|_| {
            init_links(&mut rng, &arch, &kernel, &GridSpec::default(), 2.0, &x, arch.depth())
                .unwrap()
                .layers
        })
        .collect();
    let worst = map_objective_identity_check(&points, &x, &y, &kernel, sigma_sq, &pen, &taus).map_err(|e| e.to_string())?;
    ensure(worst <= 1e-9, format!("max abs difference {worst:.2e} over 10 points (limit 1e-9)"))
}

fn prior_replication() -> Check {
    let cfg = PriorConfig::default();
    let draws = sample_prior(&cfg, &cfg.inputs()).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut detail = Vec::new();
    for l in 1..=cfg.depth() {
        let r = mahalanobis_diagnostics(&draws, l, None, cfg.shrinkage).map_err(|e| e.to_string())?;
        if l == 1 {
            ok &= r.ks_distance <= 0.1;
        }
        if l >= 3 {
            ok &= r.ks_distance >= 0.15;
            ok &= (0.15..=0.45).contains(&r.fraction_below_50);
            ok &= (0.08..=0.35).contains(&r.fraction_above_150);
        }
        detail.push(format!(
            "l{l} KS {:.3} <50 {:.3} >150 {:.3}",
            r.ks_distance, r.fraction_below_50, r.fraction_above_150
        ));
    }
    ensure(ok, detail.join("; "))
}

fn lambda_rule() -> Check {
    let a = Architecture::new(vec![3, 6, 6, 1]).unwrap();
    let got = lambda_lower(100, &a);
    let want = 100f64.powf(-0.8) * 60.0;
    let rel = (got - want).abs() / want;
    ensure(rel <= 1e-12, format!("{got:.6} vs {want:.6}, rel diff {rel:.1e}"))
}

fn bo_contract() -> Check {
    // Real tuner on a small problem: call count, phases and argmin.
    let mut rng = Rng::new(800);
    let x = random_inputs(&mut rng, 60, 2);
    let y = random_response(&mut rng, &x);
    let arch = Architecture::new(vec![2, 3, 1]).unwrap();
    let train = TrainConfig {
        max_steps: 10,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let bo = BoConfig::default();
    let tuned = tune_last_lambda(&x, &y, &arch, &KernelConfig::default(), &train, &bo).map_err(|e| e.to_string())?;
    let n_random = tuned.log.iter().filter(|e| e.phase == Phase::Random).count();
    let n_bo = tuned.log.iter().filter(|e| e.phase == Phase::Bo).count();
    let min = tuned.log.iter().map(|e| e.cv_rmse).fold(f64::INFINITY, f64::min);
    let contract = tuned.log.len() == 15 && n_random == 5 && n_bo == 10 && tuned.cv_rmse == min;

    // Convex proxy with a known minimizer, injected in place of CV.
    let s = lambda_lower(60, &arch);
    let (lo, hi) = (bo.range_low * s, bo.range_high * s);
    let step = (hi.ln() - lo.ln()) / (bo.candidate_grid_size - 1) as f64;
    let mut hits = 0;
    let mut calls_ok = true;
    for seed in 0..10u64 {
        let target = Rng::new(seed).derive(9).uniform_in(lo.ln() + 0.5, hi.ln() - 0.5);
        let cfg = BoConfig { seed, ..bo.clone() };
        let mut calls = 0;
        let res = bayes_opt(&cfg, lo, hi, |lambda| {
            calls += 1;
            Ok(0.3 + 0.05 * (lambda.ln() - target).powi(2))
        })
        .map_err(|e| e.to_string())?;
        calls_ok &= calls == 15;
        if (res.lambda.ln() - target).abs() <= step {
            hits += 1;
        }
    }
    ensure(
        contract && calls_ok && hits >= 9,
        format!(
            "tuner log {} rows ({n_random} random, {n_bo} bo), argmin returned {}; proxy within one grid step ({step:.4} in log) in {hits}/10 seeds",
            tuned.log.len(),
            tuned.cv_rmse == min
        ),
    )
}

fn size_trend() -> Check {
    let cfg = SweepConfig {
        function: BenchmarkId::F3,
        sizes: vec![100, 800, 1600],
        replicates: 5,
        methods: vec![Method::Wahkon, Method::Mlp, Method::Mean],
        ..SweepConfig::default()
    };
    let res = run_size_sweep_with(&cfg, |_| {}).map_err(|e| e.to_string())?;
    let failed = res.rows.iter().filter(|r| r.test_rmse.is_none()).count();
    let m = |method, n| res.mean_rmse(method, n).unwrap_or(f64::NAN);
    let (w100, w800, w1600) = (m(Method::Wahkon, 100), m(Method::Wahkon, 800), m(Method::Wahkon, 1600));
    let (mean800, mlp800) = (m(Method::Mean, 800), m(Method::Mlp, 800));
    let ok = failed == 0 && w1600 < w100 && w800 <= 0.5 * mean800 && w800 < mlp800;
    ensure(
        ok,
        format!(
            "wahkon n=100 {w100:.4}, n=800 {w800:.4}, n=1600 {w1600:.4}; n=800 mean {mean800:.4} (ratio {:.3}, need <= 0.5), mlp {mlp800:.4}; failed cells {failed}",
            w800 / mean800
        ),
    )
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn objective_comparison() -> Check {
    let mut ratios = Vec::new();
    let mut posc = Vec::new();
    let mut dosc = Vec::new();
    for seed in 0..5 {
        let cfg = CompareConfig {
            function: BenchmarkId::F1,
            n_train: 400,
            seed,
            ..CompareConfig::default()
        };
        let s = compare_objectives(&cfg).map_err(|e| e.to_string())?.summary;
        ratios.push(s.step_ratio);
        posc.push(s.profile_oscillations as f64);
        dosc.push(s.direct_oscillations as f64);
    }
    let list = |v: &[f64]| v.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ");
    let detail = format!("step ratios [{}]; oscillations profile [{}] direct [{}]", list(&ratios), list(&posc), list(&dosc));
    let (r, p, d) = (median(&mut ratios), median(&mut posc), median(&mut dosc));
    ensure(r >= 1.5 && d >= p, format!("median ratio {r:.2} (need >= 1.5), median oscillations {d} vs {p}; {detail}"))
}

fn wahkon_bin(args: &[&str]) -> Result<PathBuf, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_wahkon"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("run directory: "))
        .map(PathBuf::from)
        .ok_or_else(|| "no run directory reported".into())
}

/// File contents with the named wall-clock columns removed.
fn numeric_content(path: &Path, timing: &[&str]) -> Result<String, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if timing.is_empty() {
        return Ok(text);
    }
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let keep: Vec<usize> = (0..header.len()).filter(|&i| !timing.contains(&header[i])).collect();
    let pick = |l: &str| {
        let f: Vec<&str> = l.split(',').collect();
        keep.iter().map(|&i| f[i]).collect::<Vec<_>>().join(",")
    };
    Ok(std::iter::once(pick(&header.join(","))).chain(lines.map(pick)).collect::<Vec<_>>().join("\n"))
}

fn determinism_and_persistence() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = Rng::new(1100);
    let x = random_inputs(&mut rng, 80, 2);
    let y = random_response(&mut rng, &x);
    let ds = wahkon::benchmarks::Dataset::new(x.clone(), y.clone(), "acceptance").unwrap();
    let data = tmp.path().join("data.csv");
    ds.write_csv(fs::File::create(&data).unwrap()).unwrap();
    let d = data.to_str().unwrap();
    let out = tmp.path().join("runs");
    let o = out.to_str().unwrap();

    let small = ["--set", "train.max_steps=25", "--set", "train.batch_size=40"];
    let runs: Vec<(Vec<&str>, Vec<(&str, Vec<&str>)>)> = vec![
        (
            [&["train", "--data", d, "--out", o, "--seed", "3"][..], &small[..]].concat(),
            vec![("model.json", vec![]), ("history.csv", vec!["wall_ms"]), ("penalties.json", vec![])],
        ),
        (
            [&["tune", "--data", d, "--out", o, "--seed", "3"][..], &small[..]].concat(),
            vec![("tune_log.csv", vec![]), ("tune.json", vec![])],
        ),
        (
            vec!["prior", "--out", o, "--seed", "3", "--set", "prior.n_draws=200", "--set", "prior.n_points=50"],
            vec![("d2.csv", vec![]), ("qq.csv", vec![]), ("moments.csv", vec![])],
        ),
        (
            [
                &["benchmark", "--out", o, "--seed", "3"][..],
                &small[..],
                &["--set", "benchmark.sizes=[100]", "--set", "benchmark.replicates=1", "--set", "benchmark.tune=false"][..],
                &["--set", "benchmark.test_size=200"][..],
            ]
            .concat(),
            vec![("results.csv", vec!["train_seconds"])],
        ),
        (
            [
                &["compare", "--out", o, "--seed", "3"][..],
                &small[..],
                &["--set", "compare.n_train=100", "--set", "compare.test_size=200"][..],
            ]
            .concat(),
            vec![("comparison.csv", vec!["wall_ms"]), ("summary.json", vec![])],
        ),
    ];
    let mut mismatches = Vec::new();
    let mut first_train = None;
    for (args, files) in &runs {
        let a = wahkon_bin(args)?;
        let b = wahkon_bin(args)?;
        if a == b {
            return Err(format!("rerun of {} reused {}", args[0], a.display()));
        }
        for (name, timing) in files {
            if numeric_content(&a.join(name), timing)? != numeric_content(&b.join(name), timing)? {
                mismatches.push(format!("{}/{name}", args[0]));
            }
        }
        if args[0] == "train" {
            first_train = Some(a);
        }
    }
    let train_dir = first_train.expect("train ran");

    // Predictions: the same model twice, and a save/load round trip.
    let model_path = train_dir.join("model.json");
    let p1 = wahkon_bin(&["predict", "--model", model_path.to_str().unwrap(), "--data", d, "--out", o])?;
    let p2 = wahkon_bin(&["predict", "--model", model_path.to_str().unwrap(), "--data", d, "--out", o])?;
    if fs::read(p1.join("predictions.csv")).unwrap() != fs::read(p2.join("predictions.csv")).unwrap() {
        mismatches.push("predict/predictions.csv".into());
    }
    let cfg = wahkon_cli::config::resolve(None, &["train.max_steps=25".into(), "train.batch_size=40".into()], Some(3))
        .map_err(|e| e.to_string())?;
    let arch = cfg.architecture(2).map_err(|e| e.to_string())?;
    let s = lambda_lower(80, &arch);
    let pen = PenaltyConfig::new(s, cfg.model.lambda_last_factor * s, 80).unwrap();
    let (model, _) = train_profile(&x, &y, &arch, &cfg.kernel().unwrap(), &pen, &cfg.train_config().unwrap())
        .map_err(|e| e.to_string())?;
    let loaded = ModelFile::load(&model_path).map_err(|e| e.to_string())?;
    let resaved = tmp.path().join("resaved.json");
    loaded.save(&resaved).map_err(|e| e.to_string())?;
    let reloaded = ModelFile::load(&resaved).map_err(|e| e.to_string())?.to_model().map_err(|e| e.to_string())?;
    let mem = predict(&model, &x).unwrap();
    let d_load = (predict(&loaded.to_model().unwrap(), &x).unwrap() - &mem).amax();
    let d_reload = (predict(&reloaded, &x).unwrap() - &mem).amax();
    ensure(
        mismatches.is_empty() && d_load <= 1e-12 && d_reload <= 1e-12,
        format!(
            "{} reruns compared, mismatches {:?}; round-trip prediction change {d_load:.1e} / {d_reload:.1e} (limit 1e-12)",
            runs.len() + 1,
            mismatches
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("1 envelope gradient check", gradient_check),
        ("2 profile objective oracle", profile_oracle),
        ("3 representer/grid identity", representer_grid_identity),
        ("4 prior moments", prior_moments),
        ("5 MAP calibration", map_calibration),
        ("6 deep prior non-Gaussianity", prior_replication),
        ("7 lambda_lower rule", lambda_rule),
        ("8 BO tuner contract", bo_contract),
        ("9 f3 sample-size trend", size_trend),
        ("10 profile vs direct on f1", objective_comparison),
        ("11 determinism and persistence", determinism_and_persistence),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(&format!("{o} "))) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {name}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
