use std::collections::BTreeMap;
use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;

use super::report::{
    AblationReport, AblationRow, BenchmarkReport, DatasetAblation, DatasetReport, FoldRecord,
    MethodSummary, ShrinkageRecord, ShrinkageReport,
};
use super::stats::{mean, median, pearson, sample_std};
use super::{BenchError, BenchMethod, NamedDataset, RunSpec, REPORT_VERSION};
use crate::baselines::{kernel_predict, knn_predict, NeighborConfig};
use crate::construction::fit_js_tree;
use crate::data::{make_folds, mse, Dataset};
use crate::shrinkage::{apply_js_to_leaves, JsConfig};
use crate::tree::{fit_cart, InductionConfig, Method, TreeModel};

struct FoldFit {
    repeat: usize,
    fold: usize,
    train: Dataset,
    test: Dataset,
    trees: BTreeMap<BenchMethod, TreeModel>,
}

fn tree_config(spec: &RunSpec, method: Method, lambda: f64) -> InductionConfig {
    InductionConfig {
        min_split: spec.min_split,
        min_leaf: spec.min_leaf,
        method,
        js: method.uses_js().then(|| JsConfig::with_lambda(lambda)),
    }
}

/// CART and P-JSRT share one fitted structure per fold, as do C-JSRT and
/// CP-JSRT.
fn fit_fold(
    data: &Dataset,
    spec: &RunSpec,
    methods: &[BenchMethod],
    lambda: f64,
    (repeat, fold, train_rows, test_rows): (usize, usize, Vec<usize>, Vec<usize>),
) -> Result<FoldFit, BenchError> {
    let train = data.subset(&train_rows);
    let test = data.subset(&test_rows);
    let wants = |m: BenchMethod| methods.contains(&m);
    let mut trees = BTreeMap::new();

    if wants(BenchMethod::Cart) || wants(BenchMethod::PJsrt) {
        let cart = fit_cart(&train, &tree_config(spec, Method::Cart, lambda))?;
        if wants(BenchMethod::PJsrt) {
            let js = JsConfig::default();
            trees.insert(BenchMethod::PJsrt, apply_js_to_leaves(&cart, &js)?);
        }
        if wants(BenchMethod::Cart) {
            trees.insert(BenchMethod::Cart, cart);
        }
    }
    if wants(BenchMethod::CJsrt) || wants(BenchMethod::CpJsrt) {
        let config = tree_config(spec, Method::CJsrt, lambda);
        let c = fit_js_tree(&train, &config)?;
        if wants(BenchMethod::CpJsrt) {
            trees.insert(BenchMethod::CpJsrt, apply_js_to_leaves(&c, config.js_config()?)?);
        }
        if wants(BenchMethod::CJsrt) {
            trees.insert(BenchMethod::CJsrt, c);
        }
    }
    Ok(FoldFit {
        repeat,
        fold,
        train,
        test,
        trees,
    })
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = black_box(f());
    (out, start.elapsed().as_secs_f64() * 1e3)
}

fn predict_fold(
    fit: &FoldFit,
    method: BenchMethod,
    knn: &NeighborConfig,
) -> Result<FoldRecord, BenchError> {
    let test = &fit.test;
    let rows = 0..test.n_samples();
    let (predictions, predict_ms) = match method {
        BenchMethod::Knnrt => {
            let (p, ms) = timed(|| {
                rows.map(|i| knn_predict(&fit.train, test.row(i), knn))
                    .collect::<Result<Vec<f64>, _>>()
            });
            (p?, ms)
        }
        BenchMethod::Krt => {
            let (p, ms) = timed(|| {
                rows.map(|i| kernel_predict(&fit.train, test.row(i)))
                    .collect::<Result<Vec<f64>, _>>()
            });
            (p?, ms)
        }
        tree_method => {
            let tree = &fit.trees[&tree_method];
            let (p, ms) = timed(|| {
                rows.map(|i| tree.predict(test.row(i)))
                    .collect::<Result<Vec<f64>, _>>()
            });
            (p?, ms)
        }
    };
    let tree = fit.trees.get(&method);
    Ok(FoldRecord {
        repeat: fit.repeat,
        fold: fit.fold,
        n_train: fit.train.n_samples(),
        n_test: test.n_samples(),
        mse: mse(&predictions, test.targets())?,
        predict_ms,
        n_leaves: tree.map(TreeModel::n_leaves),
        shrink_weight: tree
            .and_then(|t| t.js_diagnostics.as_ref())
            .filter(|d| d.used_js)
            .map(|d| d.shrink_weight),
    })
}

/// Repeated k-fold CV of `methods` on one dataset. Fits run in parallel when
/// `spec.parallel`; predictions are timed one fold at a time.
fn cv_dataset(
    ds: &NamedDataset,
    spec: &RunSpec,
    methods: &[BenchMethod],
    lambda: f64,
) -> Result<DatasetReport, BenchError> {
    let data = &ds.data;
    let plan = make_folds(data.n_samples(), spec.k, spec.repeats, spec.seed)?;
    let jobs: Vec<(usize, usize, Vec<usize>, Vec<usize>)> = (0..spec.repeats)
        .flat_map(|r| (0..spec.k).map(move |f| (r, f)))
        .map(|(r, f)| {
            let (train, test) = plan.split(r, f);
            (r, f, train, test)
        })
        .collect();
    let fits: Vec<FoldFit> = if spec.parallel {
        jobs.into_par_iter()
            .map(|job| fit_fold(data, spec, methods, lambda, job))
            .collect::<Result<_, _>>()?
    } else {
        jobs.into_iter()
            .map(|job| fit_fold(data, spec, methods, lambda, job))
            .collect::<Result<_, _>>()?
    };

    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let knn = NeighborConfig { k: spec.knn_k };
    let mut summaries = Vec::with_capacity(methods.len());
    for &method in &methods {
        let folds: Vec<FoldRecord> = fits
            .iter()
            .map(|fit| predict_fold(fit, method, &knn))
            .collect::<Result<_, _>>()?;
        let mses: Vec<f64> = folds.iter().map(|f| f.mse).collect();
        let times: Vec<f64> = folds.iter().map(|f| f.predict_ms).collect();
        summaries.push(MethodSummary {
            method,
            mse_mean: mean(&mses),
            mse_std: sample_std(&mses),
            predict_ms_median: median(&times),
            predict_ms_total: times.iter().sum(),
            folds,
        });
    }

    let find = |m: BenchMethod| summaries.iter().find(|s| s.method == m);
    let mut mse_reduction_pct = BTreeMap::new();
    if let Some(cart) = find(BenchMethod::Cart) {
        for m in [BenchMethod::PJsrt, BenchMethod::CJsrt, BenchMethod::CpJsrt] {
            if let Some(s) = find(m) {
                if cart.mse_mean > 0.0 {
                    mse_reduction_pct.insert(m, 100.0 * (cart.mse_mean - s.mse_mean) / cart.mse_mean);
                } else if s.mse_mean == 0.0 {
                    mse_reduction_pct.insert(m, 0.0);
                }
            }
        }
    }
    let weights: Vec<f64> = find(BenchMethod::PJsrt)
        .map(|s| s.folds.iter().filter_map(|f| f.shrink_weight).collect())
        .unwrap_or_default();
    let avg_shrink_weight = (!weights.is_empty()).then(|| mean(&weights));

    Ok(DatasetReport {
        name: ds.name.clone(),
        n_samples: data.n_samples(),
        n_features: data.n_features(),
        methods: summaries,
        mse_reduction_pct,
        avg_shrink_weight,
        js_fold_count: weights.len(),
    })
}

/// [`run_cv`] over datasets already in memory; `spec.datasets` is ignored.
pub fn run_cv_on(datasets: &[NamedDataset], spec: &RunSpec) -> Result<BenchmarkReport, BenchError> {
    spec.validate_protocol()?;
    if datasets.is_empty() {
        return Err(BenchError::InvalidSpec("no datasets".into()));
    }
    let reports = datasets
        .iter()
        .map(|ds| cv_dataset(ds, spec, &spec.methods, spec.lambda))
        .collect::<Result<_, _>>()?;
    Ok(BenchmarkReport {
        schema_version: REPORT_VERSION,
        kind: "bench".into(),
        spec: spec.clone(),
        datasets: reports,
    })
}

pub fn run_cv(spec: &RunSpec) -> Result<BenchmarkReport, BenchError> {
    spec.validate()?;
    run_cv_on(&spec.load_datasets()?, spec)
}

pub fn shrinkage_analysis_on(
    datasets: &[NamedDataset],
    spec: &RunSpec,
) -> Result<ShrinkageReport, BenchError> {
    if datasets.len() < 2 {
        return Err(BenchError::InsufficientData(format!(
            "shrinkage analysis needs at least 2 datasets, got {}",
            datasets.len()
        )));
    }
    let spec = RunSpec {
        methods: vec![BenchMethod::Cart, BenchMethod::PJsrt],
        ..spec.clone()
    };
    let report = run_cv_on(datasets, &spec)?;
    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for d in &report.datasets {
        match (d.avg_shrink_weight, d.reduction(BenchMethod::PJsrt)) {
            (Some(w), Some(r)) => records.push(ShrinkageRecord {
                dataset: d.name.clone(),
                avg_shrink_weight: w,
                mse_reduction_pct: r,
                js_fold_count: d.js_fold_count,
            }),
            _ => excluded.push(d.name.clone()),
        }
    }
    let xs: Vec<f64> = records.iter().map(|r| r.avg_shrink_weight).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.mse_reduction_pct).collect();
    let pcc = pearson(&xs, &ys)?;
    Ok(ShrinkageReport {
        schema_version: REPORT_VERSION,
        kind: "shrinkage".into(),
        records,
        pcc,
        positive_correlation: pcc > 0.0,
        excluded,
    })
}

/// Pairs each dataset's average P-JSRT shrink weight with its MSE reduction
/// over CART and correlates the two across datasets.
pub fn shrinkage_analysis(spec: &RunSpec) -> Result<ShrinkageReport, BenchError> {
    spec.validate()?;
    shrinkage_analysis_on(&spec.load_datasets()?, spec)
}

pub fn ablation_on(datasets: &[NamedDataset], spec: &RunSpec) -> Result<AblationReport, BenchError> {
    spec.validate_protocol()?;
    if datasets.is_empty() {
        return Err(BenchError::InvalidSpec("no datasets".into()));
    }
    if spec.lambda_grid.is_empty() {
        return Err(BenchError::InvalidSpec("empty lambda grid".into()));
    }
    if !spec.methods.iter().any(|m| matches!(m, BenchMethod::CJsrt | BenchMethod::CpJsrt)) {
        return Err(BenchError::InvalidSpec(
            "ablation needs C-JSRT or CP-JSRT among the methods".into(),
        ));
    }
    let mut lambdas: Vec<(f64, bool)> = spec.lambda_grid.iter().map(|&l| (l, false)).collect();
    if !spec.lambda_grid.contains(&0.0) {
        lambdas.push((0.0, true));
    }

    let mut out = Vec::with_capacity(datasets.len());
    for ds in datasets {
        let base = cv_dataset(ds, spec, &[BenchMethod::Cart, BenchMethod::PJsrt], spec.lambda)?;
        let mse_of = |r: &DatasetReport, m| r.method(m).map(|s| s.mse_mean).expect("method was run");
        let mut sweep = Vec::with_capacity(lambdas.len());
        for &(lambda, control) in &lambdas {
            let r = cv_dataset(ds, spec, &[BenchMethod::CJsrt, BenchMethod::CpJsrt], lambda)?;
            sweep.push(AblationRow {
                lambda,
                control,
                c_jsrt_mse: mse_of(&r, BenchMethod::CJsrt),
                cp_jsrt_mse: mse_of(&r, BenchMethod::CpJsrt),
            });
        }
        let best = sweep
            .iter()
            .min_by(|a, b| a.c_jsrt_mse.total_cmp(&b.c_jsrt_mse).then(a.lambda.total_cmp(&b.lambda)))
            .expect("sweep is non-empty");
        out.push(DatasetAblation {
            name: ds.name.clone(),
            n_samples: ds.data.n_samples(),
            cart_mse: mse_of(&base, BenchMethod::Cart),
            p_jsrt_mse: mse_of(&base, BenchMethod::PJsrt),
            best_lambda: best.lambda,
            c_jsrt_mse: best.c_jsrt_mse,
            cp_jsrt_mse: best.cp_jsrt_mse,
            sweep,
        });
    }
    Ok(AblationReport {
        schema_version: REPORT_VERSION,
        kind: "ablation".into(),
        spec: spec.clone(),
        columns: vec![
            BenchMethod::Cart,
            BenchMethod::PJsrt,
            BenchMethod::CJsrt,
            BenchMethod::CpJsrt,
        ],
        datasets: out,
    })
}

/// Sweeps `spec.lambda_grid` for C-JSRT and CP-JSRT against CART and
/// P-JSRT. A λ = 0 control row is added when the grid lacks one.
pub fn ablation(spec: &RunSpec) -> Result<AblationReport, BenchError> {
    spec.validate()?;
    ablation_on(&spec.load_datasets()?, spec)
}
