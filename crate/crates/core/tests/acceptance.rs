//! Acceptance gate. Runs each criterion in turn so the timing checks do not
//! compete for cores, prints one PASS/FAIL line per criterion and exits
//! non-zero if any fail.

mod support;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use jsrt_core::bench::{
    ablation_on, parse_lambda_grid, run_cv_on, shrinkage_analysis_on, BenchMethod, NamedDataset, RunSpec,
};
use jsrt_core::persist::{load_model, save_model};
use jsrt_core::synthetic::{standard_suite, SyntheticSpec};
use jsrt_core::{
    apply_js_to_leaves, best_split, fit, fit_cart, js_shrink, InductionConfig, JsConfig, LeafStats, Method,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{brute_force_split, js_direct, pearson_direct, random_dataset, rel_close};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn suite() -> Vec<NamedDataset> {
    standard_suite()
        .into_iter()
        .map(|s| NamedDataset {
            name: s.name.clone(),
            data: s.generate(),
        })
        .collect()
}

const LEAF_MEANS: [f64; 6] = [21.23, 35.29, 29.87, 30.57, 44.50, 38.89];

fn leaf_mean_shrinkage() -> Check {
    let groups: Vec<LeafStats> = LEAF_MEANS
        .iter()
        .enumerate()
        .map(|(i, &m)| LeafStats::new(i, 30, m, 40.0))
        .collect();
    let gm = js_shrink(&groups, &JsConfig::default()).map_err(|e| e.to_string())?.grand_mean;
    ensure((gm - 33.39).abs() <= 0.005, || format!("GM = {gm}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..2000 {
        let groups: Vec<LeafStats> = LEAF_MEANS
            .iter()
            .enumerate()
            .map(|(i, &m)| LeafStats::new(i, rng.random_range(2..500), m, rng.random_range(1e-6..1e4)))
            .collect();
        let r = js_shrink(&groups, &JsConfig::default()).map_err(|e| e.to_string())?;
        for (g, est) in groups.iter().zip(&r.estimates) {
            ensure((r.grand_mean - est).abs() <= (r.grand_mean - g.mean).abs(), || {
                format!("trial {trial}, leaf {}: JSE {est} farther from GM than MLE {}", g.leaf_id, g.mean)
            })?;
        }
    }
    Ok(format!("GM = {gm:.4}, shrinkage holds for 2000 leaf-stat draws"))
}

fn js_matches_formula() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lambdas: Vec<f64> = (0..10).map(|i| 0.25 + i as f64 * 0.75).collect();
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let m = rng.random_range(4..=64);
        let means: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..100.0)).collect();
        let ns: Vec<usize> = (0..m).map(|_| rng.random_range(2..200)).collect();
        let vars: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..500.0)).collect();
        let groups: Vec<LeafStats> = (0..m).map(|i| LeafStats::new(i, ns[i], means[i], vars[i])).collect();
        let lambda = rng.random_range(0.1..50.0);
        let got = js_shrink(&groups, &JsConfig::with_lambda(lambda)).map_err(|e| e.to_string())?;
        let (want, gm, gamma) = js_direct(&means, &ns, &vars, lambda);
        ensure(rel_close(got.grand_mean, gm, 1e-12), || format!("trial {trial}: GM {} vs {gm}", got.grand_mean))?;
        ensure(rel_close(got.gamma, gamma, 1e-12), || format!("trial {trial}: gamma {} vs {gamma}", got.gamma))?;
        for (a, b) in got.estimates.iter().zip(&want) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
            ensure(rel_close(*a, *b, 1e-12), || format!("trial {trial}: estimate {a} vs {b}"))?;
        }
        let est_mean = got.estimates.iter().sum::<f64>() / m as f64;
        ensure((est_mean - got.grand_mean).abs() <= 1e-9, || {
            format!("trial {trial}: mean of estimates {est_mean} vs GM {}", got.grand_mean)
        })?;

        let mut prev: Option<Vec<f64>> = None;
        for &l in &lambdas {
            let r = js_shrink(&groups, &JsConfig::with_lambda(l)).map_err(|e| e.to_string())?;
            let dist: Vec<f64> = r.estimates.iter().map(|e| (e - r.grand_mean).abs()).collect();
            if let Some(p) = &prev {
                for (d, pd) in dist.iter().zip(p) {
                    ensure(*d <= *pd, || format!("trial {trial}: shrinkage not monotone at λ = {l}"))?;
                }
            }
            prev = Some(dist);
        }
    }
    Ok(format!("1000 vectors, worst relative error {worst:.2e}"))
}

fn split_matches_brute_force() -> Check {
    let mut splits = 0;
    for seed in 0..200u64 {
        let ds = random_dataset(seed, 64, 4);
        let min_leaf = 1 + (seed as usize % 4);
        let rows: Vec<usize> = (0..ds.n_samples()).collect();
        let got = best_split(&ds, &rows, min_leaf);
        let want = brute_force_split(&ds, min_leaf);
        match (&got, &want) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                ensure(
                    g.rule.feature == w.feature && g.rule.threshold == w.threshold && g.loss == w.loss,
                    || format!("seed {seed}: got {:?} loss {}, oracle {w:?}", g.rule, g.loss),
                )?;
                splits += 1;
            }
            _ => return Err(format!("seed {seed}: got {got:?}, oracle {want:?}")),
        }
    }
    Ok(format!("200 datasets, {splits} with a feasible split, all identical"))
}

fn p_jsrt_beats_cart() -> Check {
    let datasets = suite();
    for d in &datasets {
        let n = d.data.n_samples();
        ensure((500..=5000).contains(&n), || format!("{} has n = {n}", d.name))?;
    }
    let spec = RunSpec {
        methods: vec![BenchMethod::Cart, BenchMethod::PJsrt],
        ..RunSpec::default()
    };
    let report = run_cv_on(&datasets, &spec).map_err(|e| e.to_string())?;
    let mut wins = 0;
    let mut lines = Vec::new();
    for d in &report.datasets {
        let cart = d.method(BenchMethod::Cart).unwrap();
        let p = d.method(BenchMethod::PJsrt).unwrap();
        ensure(cart.folds.len() == 100, || format!("{}: {} folds", d.name, cart.folds.len()))?;
        let min_leaves = cart.folds.iter().filter_map(|f| f.n_leaves).min().unwrap_or(0);
        ensure(min_leaves > 10, || format!("{}: a fold tree has only {min_leaves} leaves", d.name))?;
        if p.mse_mean <= cart.mse_mean {
            wins += 1;
        }
        lines.push(format!("{} {:+.2}%", d.name, d.reduction(BenchMethod::PJsrt).unwrap()));
    }
    ensure(wins >= 5, || format!("P-JSRT <= CART on only {wins}/6: {}", lines.join(", ")))?;
    Ok(format!("P-JSRT <= CART on {wins}/6 ({})", lines.join(", ")))
}

fn zero_lambda_identity() -> Check {
    let mut datasets: Vec<_> = suite().into_iter().map(|d| d.data).collect();
    datasets.extend((0..20).map(|s| random_dataset(1000 + s, 300, 4)));
    for (k, ds) in datasets.iter().enumerate() {
        let mut cfg = InductionConfig::new(Method::Cart);
        cfg.min_split = 10;
        cfg.min_leaf = 3;
        let cart = fit_cart(ds, &cfg).map_err(|e| e.to_string())?;
        let c = fit(ds, &InductionConfig { method: Method::CJsrt, js: Some(JsConfig::with_lambda(0.0)), ..cfg.clone() })
            .map_err(|e| e.to_string())?;
        ensure(c.nodes == cart.nodes && c.leaf_predictions == cart.leaf_predictions, || {
            format!("dataset {k}: C-JSRT(λ=0) differs from CART")
        })?;
        let p = apply_js_to_leaves(&cart, &JsConfig::default()).map_err(|e| e.to_string())?;
        let cp = fit(ds, &InductionConfig { method: Method::CpJsrt, js: Some(JsConfig::with_lambda(0.0)), ..cfg.clone() })
            .map_err(|e| e.to_string())?;
        for i in 0..ds.n_samples() {
            let (a, b) = (cp.predict(ds.row(i)).unwrap(), p.predict(ds.row(i)).unwrap());
            ensure(a == b, || format!("dataset {k}, row {i}: CP-JSRT {a} vs P-JSRT {b}"))?;
        }
    }
    Ok(format!("{} datasets node-for-node identical", datasets.len()))
}

fn prediction_timing() -> Check {
    let spec = SyntheticSpec {
        name: "timing_10000".into(),
        n: 10_000,
        d: 4,
        bins: 4,
        amplitude: 2.0,
        noise_sd: 2.0,
        seed: 99,
    };
    let data = NamedDataset {
        name: spec.name.clone(),
        data: spec.generate(),
    };
    let run = RunSpec {
        methods: vec![BenchMethod::Cart, BenchMethod::PJsrt, BenchMethod::Knnrt, BenchMethod::Krt],
        k: 10,
        repeats: 1,
        ..RunSpec::default()
    };
    let report = run_cv_on(&[data], &run).map_err(|e| e.to_string())?;
    let d = &report.datasets[0];
    let total = |m| d.method(m).unwrap().predict_ms_total;
    let (cart, p, knn, krt) = (
        total(BenchMethod::Cart),
        total(BenchMethod::PJsrt),
        total(BenchMethod::Knnrt),
        total(BenchMethod::Krt),
    );
    let summary = format!("CART {cart:.3} ms, P-JSRT {p:.3} ms, KNNRT {knn:.1} ms, KRT {krt:.1} ms");
    ensure(p <= 3.0 * cart && knn >= 10.0 * cart && krt >= 10.0 * cart, || summary.clone())?;
    Ok(summary)
}

fn lambda_ablation() -> Check {
    let spec = RunSpec {
        methods: BenchMethod::ALL[..4].to_vec(),
        min_leaf: 10,
        lambda_grid: parse_lambda_grid("1:50:5")?,
        ..RunSpec::default()
    };
    let report = ablation_on(&suite(), &spec).map_err(|e| e.to_string())?;
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).map_err(|e| e.to_string())?;
    let columns: Vec<&str> = json["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    ensure(columns == ["CART", "P-JSRT", "C-JSRT", "CP-JSRT"], || format!("columns {columns:?}"))?;
    let mut best = Vec::new();
    for d in json["datasets"].as_array().unwrap() {
        for key in ["cart_mse", "p_jsrt_mse", "c_jsrt_mse", "cp_jsrt_mse", "best_lambda"] {
            ensure(d[key].is_number(), || format!("{} lacks {key}", d["name"]))?;
        }
    }
    for d in &report.datasets {
        ensure(d.sweep.len() == 11 && d.sweep.iter().any(|r| r.control && r.lambda == 0.0), || {
            format!("{}: sweep of {} rows", d.name, d.sweep.len())
        })?;
        let min_c = d.sweep.iter().map(|r| r.c_jsrt_mse).fold(f64::INFINITY, f64::min);
        ensure(min_c <= d.cart_mse * 1.01, || format!("{}: min C-JSRT {min_c} vs CART {}", d.name, d.cart_mse))?;
        best.push(format!("{} λ={}", d.name, d.best_lambda));
    }
    Ok(best.join(", "))
}

fn shrinkage_correlation() -> Check {
    let datasets = suite();
    ensure(datasets.len() >= 4, || "too few datasets".into())?;
    let report = shrinkage_analysis_on(&datasets, &RunSpec::default()).map_err(|e| e.to_string())?;
    ensure(report.records.len() >= 4, || format!("only {} records", report.records.len()))?;
    for r in &report.records {
        ensure((0.0..=1.0).contains(&r.avg_shrink_weight), || format!("{}: weight {}", r.dataset, r.avg_shrink_weight))?;
    }
    let xs: Vec<f64> = report.records.iter().map(|r| r.avg_shrink_weight).collect();
    let ys: Vec<f64> = report.records.iter().map(|r| r.mse_reduction_pct).collect();
    let want = pearson_direct(&xs, &ys);
    ensure((-1.0..=1.0).contains(&report.pcc), || format!("PCC {}", report.pcc))?;
    ensure((report.pcc - want).abs() <= 1e-12, || format!("PCC {} vs oracle {want}", report.pcc))?;
    Ok(format!("PCC = {:.4} (positive: {})", report.pcc, report.positive_correlation))
}

fn determinism_and_persistence() -> Check {
    let datasets: Vec<NamedDataset> = suite().into_iter().take(2).collect();
    let spec = RunSpec {
        methods: BenchMethod::ALL.to_vec(),
        k: 5,
        repeats: 2,
        seed: 42,
        ..RunSpec::default()
    };
    let a = run_cv_on(&datasets, &spec).map_err(|e| e.to_string())?.without_timings().to_json();
    let b = run_cv_on(&datasets, &spec).map_err(|e| e.to_string())?.without_timings().to_json();
    ensure(a == b, || "repeated runs differ".into())?;
    let serial = RunSpec { parallel: false, ..spec };
    let c = run_cv_on(&datasets, &serial).map_err(|e| e.to_string())?.without_timings().to_json();
    let strip = |s: &str| s.replace("\"parallel\": false", "\"parallel\": true");
    ensure(strip(&c) == a, || "serial and parallel runs differ".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = &datasets[0].data;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for method in Method::ALL {
        let model = fit(data, &InductionConfig::new(method)).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{}.json", method.name()));
        save_model(&model, &path).map_err(|e| e.to_string())?;
        let loaded = load_model(&path).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..data.n_features()).map(|_| rng.random_range(-0.2..1.2)).collect();
            let (p, q) = (model.predict(&x).unwrap(), loaded.predict(&x).unwrap());
            ensure(p.to_bits() == q.to_bits(), || format!("{method}: {p} vs {q} at {x:?}"))?;
        }
    }
    Ok("reports byte-identical, 4000 round-trip predictions bit-exact".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check, Option<Duration>); 9] = [
        ("1 leaf-mean shrinkage", leaf_mean_shrinkage, Some(Duration::from_secs(1))),
        ("2 JS oracle", js_matches_formula, Some(Duration::from_secs(5))),
        ("3 split oracle", split_matches_brute_force, Some(Duration::from_secs(30))),
        ("4 directional MSE", p_jsrt_beats_cart, Some(Duration::from_secs(300))),
        ("5 lambda identity", zero_lambda_identity, Some(Duration::from_secs(60))),
        ("6 timing order", prediction_timing, Some(Duration::from_secs(120))),
        ("7 ablation", lambda_ablation, Some(Duration::from_secs(600))),
        ("8 shrinkage analysis", shrinkage_correlation, None),
        ("9 determinism", determinism_and_persistence, None),
    ];
    let mut failed = 0;
    for (name, check, limit) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if limit.is_some_and(|l| elapsed > l) => {
                Err(format!("{msg}; took {elapsed:.2?}, limit {:?}", limit.unwrap()))
            }
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS [{name}]: {msg} [{elapsed:.2?}]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{name}]: {msg} [{elapsed:.2?}]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
