//! Reference implementations written straight from the formulas, kept
//! separate from the library code they check.
#![allow(dead_code)]

use jsrt_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    pub loss: f64,
}

fn sse(ys: &[f64]) -> f64 {
    let mut total = 0.0;
    for y in ys {
        total += y;
    }
    let mean = total / ys.len() as f64;
    let mut s = 0.0;
    for y in ys {
        s += (y - mean) * (y - mean);
    }
    s
}

/// Tries every feature and every midpoint between consecutive distinct
/// values, scoring each by the summed child squared error. Keeps the first
/// minimum in (feature, threshold) order.
pub fn brute_force_split(ds: &Dataset, min_leaf: usize) -> Option<OracleSplit> {
    let n = ds.n_samples();
    let mut best: Option<OracleSplit> = None;
    for f in 0..ds.n_features() {
        let mut values: Vec<f64> = (0..n).map(|i| ds.value(i, f)).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let mut t = w[0] + (w[1] - w[0]) / 2.0;
            if t >= w[1] {
                t = w[0];
            }
            let mut left = Vec::new();
            let mut right = Vec::new();
            for i in 0..n {
                if ds.value(i, f) <= t {
                    left.push(ds.target(i));
                } else {
                    right.push(ds.target(i));
                }
            }
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let loss = sse(&left) + sse(&right);
            let better = match &best {
                None => true,
                Some(b) => loss < b.loss,
            };
            if better {
                best = Some(OracleSplit {
                    feature: f,
                    threshold: t,
                    loss,
                });
            }
        }
    }
    best
}

/// Positive-part JS estimates, transcribed term by term:
/// `GM = Σ ȳ_i / m`, `γ = (m - 3) / Σ n_i (ȳ_i - GM)² / σ_i²`,
/// `ŷ_i = GM + (1 - λγ)⁺ (ȳ_i - GM)`.
pub fn js_direct(means: &[f64], ns: &[usize], variances: &[f64], lambda: f64) -> (Vec<f64>, f64, f64) {
    let m = means.len() as f64;
    let gm = means.iter().sum::<f64>() / m;
    let mut s = 0.0;
    for i in 0..means.len() {
        s += ns[i] as f64 * (means[i] - gm).powi(2) / variances[i];
    }
    let gamma = (m - 3.0) / s;
    let c = (1.0 - lambda * gamma).max(0.0);
    let est = means.iter().map(|&y| gm + c * (y - gm)).collect();
    (est, gm, gamma)
}

/// Pearson r from raw sums.
pub fn pearson_direct(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Small dataset on a coarse grid so duplicate feature values and tied
/// losses are common.
pub fn random_dataset(seed: u64, max_n: usize, max_d: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let d = rng.random_range(1..=max_d);
    let levels = rng.random_range(2..=12);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect())
        .collect();
    let targets: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                rng.random_range(0..4) as f64
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
        .collect();
    Dataset::from_rows(&rows, targets).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
