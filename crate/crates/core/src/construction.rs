//! Split selection with jointly shrunk child estimates (C-JSRT / CP-JSRT).
//!
//! When a node is split, each candidate's two children are estimated
//! together with every other current leaf of the partially grown tree using
//! the λ-scaled estimator, and the candidate with the smallest squared loss
//! around those estimates wins. With fewer than three other leaves the
//! children fall back to their sample means.

use crate::data::Dataset;
use crate::shrinkage::{apply_js_to_leaves, js_shrink, shrink_factor, JsConfig};
use crate::split::{search, sse_about, Moments, SplitRule};
use crate::tree::{grow, InductionConfig, LeafStats, SplitChooser, TreeError, TreeModel};

/// Current leaves of a partially grown tree, excluding the node being split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frontier {
    pub leaves: Vec<LeafStats>,
}

impl Frontier {
    pub fn new(leaves: Vec<LeafStats>) -> Self {
        Frontier { leaves }
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsSplitOutcome {
    pub rule: SplitRule,
    pub c1: f64,
    pub c2: f64,
    /// `Σ_left (y - c1)² + Σ_right (y - c2)²`
    pub loss: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Frontier sizes below this use sample means for the children.
const MIN_FRONTIER: usize = 3;

fn js_applies(frontier_len: usize, js: &JsConfig) -> bool {
    frontier_len >= MIN_FRONTIER && frontier_len + 2 >= js.min_groups_js.max(4)
}

/// Estimates for two provisional children, jointly with the frontier when
/// the frontier is large enough, else their sample means.
pub fn child_estimates(
    frontier: &Frontier,
    left: &LeafStats,
    right: &LeafStats,
    js: &JsConfig,
) -> Result<(f64, f64), TreeError> {
    if !js_applies(frontier.len(), js) {
        return Ok((left.mean, right.mean));
    }
    let mut joint = frontier.leaves.clone();
    joint.push(left.clone());
    joint.push(right.clone());
    let r = js_shrink(&joint, js)?;
    let m = r.estimates.len();
    Ok((r.estimates[m - 2], r.estimates[m - 1]))
}

/// Frontier sums reused across every candidate of one split decision.
struct FrontierSums {
    count: usize,
    sum_means: f64,
    weight: f64,
    weighted_mean: f64,
    /// `Σ w (ỹ - weighted_mean)`, zero up to rounding
    first: f64,
    /// `Σ w (ỹ - weighted_mean)²`
    second: f64,
}

impl FrontierSums {
    fn new(frontier: &Frontier, floor: f64) -> Self {
        let w = |g: &LeafStats| g.n as f64 / g.variance.max(floor);
        let weight: f64 = frontier.leaves.iter().map(w).sum();
        let weighted_mean = frontier.leaves.iter().map(|g| w(g) * g.mean).sum::<f64>() / weight;
        let (mut first, mut second) = (0.0, 0.0);
        for g in &frontier.leaves {
            let d = g.mean - weighted_mean;
            first += w(g) * d;
            second += w(g) * d * d;
        }
        FrontierSums {
            count: frontier.len(),
            sum_means: frontier.leaves.iter().map(|g| g.mean).sum(),
            weight,
            weighted_mean,
            first,
            second,
        }
    }

    /// Approximate loss of a candidate from prefix moments, in O(1).
    fn fast_loss(&self, m: &Moments, js: &JsConfig) -> f64 {
        let sse = m.sse_left() + m.sse_right();
        let (m1, m2) = (m.mean_left(), m.mean_right());
        let groups = self.count + 2;
        let gm = (self.sum_means + m1 + m2) / groups as f64;
        let shift = self.weighted_mean - gm;
        let w1 = m.n_left as f64 / m.var_left().max(js.variance_floor);
        let w2 = m.n_right as f64 / m.var_right().max(js.variance_floor);
        let denom = (self.second + 2.0 * shift * self.first + self.weight * shift * shift).max(0.0)
            + w1 * (m1 - gm) * (m1 - gm)
            + w2 * (m2 - gm) * (m2 - gm);
        let gamma = if denom == 0.0 {
            f64::INFINITY
        } else {
            (groups - 3) as f64 / denom
        };
        let pull = 1.0 - shrink_factor(js.lambda, gamma);
        sse + pull
            * pull
            * (m.n_left as f64 * (m1 - gm) * (m1 - gm) + m.n_right as f64 * (m2 - gm) * (m2 - gm))
    }
}

/// Best split of `rows` when children are estimated jointly with `frontier`.
/// Same candidate set, `min_leaf` constraint and tie-breaking as
/// [`crate::split::best_split`].
pub fn js_best_split(
    ds: &Dataset,
    rows: &[usize],
    frontier: &Frontier,
    config: &InductionConfig,
) -> Result<Option<JsSplitOutcome>, TreeError> {
    let js = config.js_config()?.clone();
    js.validate()?;
    let min_leaf = config.effective_min_leaf();
    let use_js = js_applies(frontier.len(), &js);
    let sums = use_js.then(|| FrontierSums::new(frontier, js.variance_floor));
    let mut failure: Option<TreeError> = None;

    let found = search(
        ds,
        rows,
        min_leaf,
        |m| match &sums {
            Some(s) => s.fast_loss(m, &js),
            None => m.sse_left() + m.sse_right(),
        },
        |left, right| {
            let l = LeafStats::from_rows(usize::MAX - 1, ds, left);
            let r = LeafStats::from_rows(usize::MAX, ds, right);
            match child_estimates(frontier, &l, &r, &js) {
                Ok((c1, c2)) => (sse_about(ds, left, c1) + sse_about(ds, right, c2), (c1, c2)),
                Err(e) => {
                    failure.get_or_insert(e);
                    (f64::INFINITY, (l.mean, r.mean))
                }
            }
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(found.map(|f| JsSplitOutcome {
        rule: f.rule,
        c1: f.extra.0,
        c2: f.extra.1,
        loss: f.loss,
        left: f.left,
        right: f.right,
    }))
}

struct JsChooser<'a> {
    config: &'a InductionConfig,
}

impl SplitChooser for JsChooser<'_> {
    fn choose(
        &mut self,
        ds: &Dataset,
        rows: &[usize],
        frontier: &[LeafStats],
    ) -> Result<Option<(SplitRule, Vec<usize>, Vec<usize>)>, TreeError> {
        let frontier = Frontier::new(frontier.to_vec());
        Ok(js_best_split(ds, rows, &frontier, self.config)?.map(|o| (o.rule, o.left, o.right)))
    }
}

/// Grows a tree breadth-first with [`js_best_split`]. C-JSRT keeps the
/// sample-mean leaves; CP-JSRT then applies JS leaf prediction.
pub fn fit_js_tree(train: &Dataset, config: &InductionConfig) -> Result<TreeModel, TreeError> {
    if !config.method.js_construction() {
        return Err(TreeError::InvalidConfig(format!(
            "{} does not use JS construction",
            config.method
        )));
    }
    let tree = grow(train, config, &mut JsChooser { config })?;
    if config.method.js_prediction() {
        apply_js_to_leaves(&tree, config.js_config()?)
    } else {
        Ok(tree)
    }
}
