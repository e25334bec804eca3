//! Brute-force neighbor predictors used as comparison leaf estimators.
//!
//! Both search the whole training set with Euclidean distance; no index is
//! built.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;

#[derive(Debug, Error, PartialEq)]
pub enum NeighborError {
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k = {k} exceeds the {n} training samples")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborConfig {
    pub k: usize,
}

impl Default for NeighborConfig {
    fn default() -> Self {
        NeighborConfig { k: 5 }
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dim(train: &Dataset, x: &[f64]) -> Result<(), NeighborError> {
    if x.len() != train.n_features() {
        return Err(NeighborError::DimensionMismatch {
            expected: train.n_features(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Mean target of the `k` nearest training rows. Equal distances prefer the
/// lower row index.
pub fn knn_predict(train: &Dataset, x: &[f64], config: &NeighborConfig) -> Result<f64, NeighborError> {
    check_dim(train, x)?;
    let n = train.n_samples();
    let k = config.k;
    if k == 0 {
        return Err(NeighborError::ZeroK);
    }
    if k > n {
        return Err(NeighborError::KTooLarge { k, n });
    }
    let mut dist: Vec<(f64, usize)> = (0..n).map(|i| (squared_distance(x, train.row(i)), i)).collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < n {
        dist.select_nth_unstable_by(k - 1, by_distance);
        dist.truncate(k);
    }
    dist.sort_unstable_by(by_distance);
    // Offsets from the nearest target keep a constant neighborhood exact.
    let anchor = train.target(dist[0].1);
    Ok(anchor + dist.iter().map(|&(_, i)| train.target(i) - anchor).sum::<f64>() / k as f64)
}

/// Inverse-distance weighted mean over all training rows. If `x` coincides
/// with one or more training rows, their plain mean is returned.
pub fn kernel_predict(train: &Dataset, x: &[f64]) -> Result<f64, NeighborError> {
    check_dim(train, x)?;
    let mut weighted = 0.0;
    let mut total = 0.0;
    let mut exact_sum = 0.0;
    let mut exact_count = 0usize;
    let anchor = train.target(0);
    for i in 0..train.n_samples() {
        let d2 = squared_distance(x, train.row(i));
        let y = train.target(i) - anchor;
        if d2 == 0.0 {
            exact_sum += y;
            exact_count += 1;
        } else if exact_count == 0 {
            let w = 1.0 / d2.sqrt();
            weighted += w * y;
            total += w;
        }
    }
    if exact_count > 0 {
        Ok(anchor + exact_sum / exact_count as f64)
    } else {
        Ok(anchor + weighted / total)
    }
}
