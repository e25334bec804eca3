//! Exhaustive threshold search over sorted prefix sums.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature. Losses are first scored from centered prefix moments, then the
//! near-best candidates are re-scored by direct summation so the choice does
//! not depend on prefix-sum rounding. Ties go to the lowest feature index,
//! then the lowest threshold.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    pub threshold: f64,
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.feature] <= self.threshold
    }
}

/// Result of [`best_split`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub rule: SplitRule,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub loss: f64,
}

/// Threshold strictly between `lo < hi`, so `lo` routes left and `hi` right.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) * 0.5;
    if mid >= hi || !mid.is_finite() {
        lo
    } else {
        mid
    }
}

/// Mean over the given rows, summed in slice order.
pub fn mean_of(ds: &Dataset, rows: &[usize]) -> f64 {
    rows.iter().map(|&i| ds.target(i)).sum::<f64>() / rows.len() as f64
}

/// `Σ (y - c)²` over the given rows, summed in slice order.
pub fn sse_about(ds: &Dataset, rows: &[usize], c: f64) -> f64 {
    rows.iter()
        .map(|&i| {
            let r = ds.target(i) - c;
            r * r
        })
        .sum()
}

/// Prefix moments of one candidate, relative to the node's center.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Moments {
    pub n_left: usize,
    pub n_right: usize,
    pub sum_left: f64,
    pub sumsq_left: f64,
    pub sum_right: f64,
    pub sumsq_right: f64,
    pub center: f64,
}

impl Moments {
    pub fn sse_left(&self) -> f64 {
        (self.sumsq_left - self.sum_left * self.sum_left / self.n_left as f64).max(0.0)
    }

    pub fn sse_right(&self) -> f64 {
        (self.sumsq_right - self.sum_right * self.sum_right / self.n_right as f64).max(0.0)
    }

    pub fn mean_left(&self) -> f64 {
        self.center + self.sum_left / self.n_left as f64
    }

    pub fn mean_right(&self) -> f64 {
        self.center + self.sum_right / self.n_right as f64
    }

    pub fn var_left(&self) -> f64 {
        if self.n_left < 2 {
            0.0
        } else {
            self.sse_left() / (self.n_left - 1) as f64
        }
    }

    pub fn var_right(&self) -> f64 {
        if self.n_right < 2 {
            0.0
        } else {
            self.sse_right() / (self.n_right - 1) as f64
        }
    }
}

pub(crate) struct Found<T> {
    pub rule: SplitRule,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub loss: f64,
    pub extra: T,
}

const SHORTLIST_RTOL: f64 = 1e-7;

/// Generic two-stage search. `fast` scores a candidate from its prefix
/// moments; `exact` re-scores a partition and returns `(loss, extra)`.
pub(crate) fn search<T>(
    ds: &Dataset,
    rows: &[usize],
    min_leaf: usize,
    mut fast: impl FnMut(&Moments) -> f64,
    mut exact: impl FnMut(&[usize], &[usize]) -> (f64, T),
) -> Option<Found<T>> {
    let n = rows.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let center = mean_of(ds, rows);
    let centered: Vec<f64> = rows.iter().map(|&i| ds.target(i) - center).collect();
    let total_sum: f64 = centered.iter().sum();
    let total_sumsq: f64 = centered.iter().map(|v| v * v).sum();

    let mut scored: Vec<(f64, usize, f64)> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    for feature in 0..ds.n_features() {
        order.sort_by(|&a, &b| {
            ds.value(rows[a], feature)
                .total_cmp(&ds.value(rows[b], feature))
                .then(a.cmp(&b))
        });
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for pos in 0..n - min_leaf {
            let v = centered[order[pos]];
            sum += v;
            sumsq += v * v;
            let n_left = pos + 1;
            if n_left < min_leaf {
                continue;
            }
            let lo = ds.value(rows[order[pos]], feature);
            let hi = ds.value(rows[order[pos + 1]], feature);
            if lo >= hi {
                continue;
            }
            let m = Moments {
                n_left,
                n_right: n - n_left,
                sum_left: sum,
                sumsq_left: sumsq,
                sum_right: total_sum - sum,
                sumsq_right: (total_sumsq - sumsq).max(0.0),
                center,
            };
            scored.push((fast(&m), feature, midpoint(lo, hi)));
        }
    }
    let best_fast = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    if !best_fast.is_finite() {
        return None;
    }
    let tol = SHORTLIST_RTOL * (total_sumsq + best_fast.abs()) + f64::MIN_POSITIVE;

    let mut best: Option<Found<T>> = None;
    for &(score, feature, threshold) in &scored {
        if score > best_fast + tol {
            continue;
        }
        let rule = SplitRule { feature, threshold };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| ds.value(i, feature) <= threshold);
        let (loss, extra) = exact(&left, &right);
        // scored is ordered by (feature, threshold), so strict < keeps the first tie
        if best.as_ref().is_none_or(|b| loss < b.loss) {
            best = Some(Found {
                rule,
                left,
                right,
                loss,
                extra,
            });
        }
    }
    best
}

/// CART split: minimizes `Σ_left (y - ȳ_left)² + Σ_right (y - ȳ_right)²`
/// subject to both children holding at least `min_leaf` rows.
pub fn best_split(ds: &Dataset, rows: &[usize], min_leaf: usize) -> Option<SplitCandidate> {
    search(
        ds,
        rows,
        min_leaf,
        |m| m.sse_left() + m.sse_right(),
        |left, right| {
            let loss = sse_about(ds, left, mean_of(ds, left)) + sse_about(ds, right, mean_of(ds, right));
            (loss, ())
        },
    )
    .map(|f| SplitCandidate {
        rule: f.rule,
        left: f.left,
        right: f.right,
        loss: f.loss,
    })
}
