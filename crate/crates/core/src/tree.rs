//! CART regression trees: configuration, array-encoded model, greedy growth
//! and prediction.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::shrinkage::{JsConfig, JsError};
use crate::split::{best_split, mean_of, SplitRule};

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Js(#[from] JsError),
}

/// Which stages use James-Stein estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CART")]
    Cart,
    /// JS leaf predictions over a CART structure.
    #[serde(rename = "P-JSRT")]
    PJsrt,
    /// JS child estimates during split selection, MLE leaves.
    #[serde(rename = "C-JSRT")]
    CJsrt,
    /// JS in both construction and prediction.
    #[serde(rename = "CP-JSRT")]
    CpJsrt,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cart, Method::PJsrt, Method::CJsrt, Method::CpJsrt];

    pub fn name(self) -> &'static str {
        match self {
            Method::Cart => "CART",
            Method::PJsrt => "P-JSRT",
            Method::CJsrt => "C-JSRT",
            Method::CpJsrt => "CP-JSRT",
        }
    }

    pub fn uses_js(self) -> bool {
        self != Method::Cart
    }

    pub fn js_construction(self) -> bool {
        matches!(self, Method::CJsrt | Method::CpJsrt)
    }

    pub fn js_prediction(self) -> bool {
        matches!(self, Method::PJsrt | Method::CpJsrt)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown tree method `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductionConfig {
    pub min_split: usize,
    pub min_leaf: usize,
    pub method: Method,
    pub js: Option<JsConfig>,
}

impl Default for InductionConfig {
    fn default() -> Self {
        InductionConfig::new(Method::Cart)
    }
}

impl InductionConfig {
    /// Defaults: split nodes with at least 20 samples, leaves of at least 5,
    /// and a default [`JsConfig`] whenever the method needs one.
    pub fn new(method: Method) -> Self {
        InductionConfig {
            min_split: 20,
            min_leaf: 5,
            method,
            js: method.uses_js().then(JsConfig::default),
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        if let Some(js) = self.js.as_mut() {
            js.lambda = lambda;
        }
        self
    }

    /// The configured minimum leaf size, raised to 2 so every leaf has an
    /// unbiased variance.
    pub fn effective_min_leaf(&self) -> usize {
        self.min_leaf.max(2)
    }

    pub fn js_config(&self) -> Result<&JsConfig, TreeError> {
        self.js
            .as_ref()
            .ok_or_else(|| TreeError::InvalidConfig(format!("{} requires a JS config", self.method)))
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if self.min_split < 2 {
            return Err(TreeError::InvalidConfig("min_split must be at least 2".into()));
        }
        match (&self.js, self.method.uses_js()) {
            (Some(js), true) => js.validate().map_err(TreeError::from),
            (None, false) => Ok(()),
            (Some(_), false) => Err(TreeError::InvalidConfig("CART takes no JS config".into())),
            (None, true) => Err(TreeError::InvalidConfig(format!(
                "{} requires a JS config",
                self.method
            ))),
        }
    }
}

/// Per-leaf sufficient statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafStats {
    pub leaf_id: usize,
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance; zero when `n < 2`.
    pub variance: f64,
}

impl LeafStats {
    pub fn new(leaf_id: usize, n: usize, mean: f64, variance: f64) -> Self {
        LeafStats {
            leaf_id,
            n,
            mean,
            variance,
        }
    }

    /// Mean and unbiased variance of the targets at `rows`, summed in order.
    pub fn from_rows(leaf_id: usize, ds: &Dataset, rows: &[usize]) -> Self {
        let n = rows.len();
        let mean = mean_of(ds, rows);
        let variance = if n < 2 {
            0.0
        } else {
            crate::split::sse_about(ds, rows, mean) / (n - 1) as f64
        };
        LeafStats {
            leaf_id,
            n,
            mean,
            variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        rule: SplitRule,
        left: usize,
        right: usize,
        n_samples: usize,
    },
    Leaf(LeafStats),
}

/// Shrinkage diagnostics recorded when JS leaf prediction was attempted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsDiagnostics {
    pub used_js: bool,
    pub grand_mean: f64,
    #[serde(with = "crate::persist::extended_f64")]
    pub gamma: f64,
    pub shrink_factor: f64,
    pub shrink_weight: f64,
}

/// Fitted tree. Node 0 is the root; `leaf_predictions[leaf_id]` is the
/// output of each leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub feature_names: Vec<String>,
    pub nodes: Vec<Node>,
    pub leaf_predictions: Vec<f64>,
    pub config: InductionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub js_diagnostics: Option<JsDiagnostics>,
}

impl TreeModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_predictions.len()
    }

    /// Leaf statistics ordered by leaf id.
    pub fn leaves(&self) -> Vec<&LeafStats> {
        let mut leaves: Vec<&LeafStats> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf(s) => Some(s),
                Node::Split { .. } => None,
            })
            .collect();
        leaves.sort_by_key(|s| s.leaf_id);
        leaves
    }

    /// Id of the leaf reached by `x`. Values equal to a threshold go left.
    #[inline]
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    rule, left, right, ..
                } => at = if rule.goes_left(x) { *left } else { *right },
                Node::Leaf(s) => return s.leaf_id,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, TreeError> {
        if x.len() != self.n_features() {
            return Err(TreeError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(self.leaf_predictions[self.leaf_of(x)])
    }

    pub fn predict_dataset(&self, ds: &Dataset, rows: &[usize]) -> Result<Vec<f64>, TreeError> {
        rows.iter().map(|&i| self.predict(ds.row(i))).collect()
    }

    /// Same split rules and leaf statistics, ignoring leaf predictions.
    pub fn same_structure(&self, other: &TreeModel) -> bool {
        self.nodes == other.nodes
    }
}

/// Chooses a split for `rows` given the current leaves of the partially
/// grown tree, excluding the node being split.
pub(crate) trait SplitChooser {
    fn choose(
        &mut self,
        ds: &Dataset,
        rows: &[usize],
        frontier: &[LeafStats],
    ) -> Result<Option<(SplitRule, Vec<usize>, Vec<usize>)>, TreeError>;
}

struct CartChooser {
    min_leaf: usize,
}

impl SplitChooser for CartChooser {
    fn choose(
        &mut self,
        ds: &Dataset,
        rows: &[usize],
        _frontier: &[LeafStats],
    ) -> Result<Option<(SplitRule, Vec<usize>, Vec<usize>)>, TreeError> {
        Ok(best_split(ds, rows, self.min_leaf).map(|s| (s.rule, s.left, s.right)))
    }
}

/// Breadth-first greedy growth. A node becomes a leaf when it holds fewer
/// than `min_split` rows, its targets are all equal, or no split is found.
/// Leaf ids follow the order in which leaves are finalized.
pub(crate) fn grow(
    train: &Dataset,
    config: &InductionConfig,
    chooser: &mut impl SplitChooser,
) -> Result<TreeModel, TreeError> {
    if train.n_samples() == 0 {
        return Err(TreeError::EmptyTrainingSet);
    }
    config.validate()?;

    enum Slot {
        Pending(Vec<usize>),
        Done(Node),
    }
    let mut slots = vec![Slot::Pending((0..train.n_samples()).collect())];
    let mut current: BTreeMap<usize, LeafStats> = BTreeMap::new();
    current.insert(0, LeafStats::from_rows(0, train, &(0..train.n_samples()).collect::<Vec<_>>()));
    let mut queue = VecDeque::from([0usize]);
    let mut next_leaf = 0;

    while let Some(at) = queue.pop_front() {
        let rows = match std::mem::replace(&mut slots[at], Slot::Pending(Vec::new())) {
            Slot::Pending(rows) => rows,
            Slot::Done(_) => unreachable!("node expanded twice"),
        };
        let mut stats = current.remove(&at).expect("pending node has stats");
        let first = train.target(rows[0]);
        let splittable =
            rows.len() >= config.min_split && rows.iter().any(|&i| train.target(i) != first);
        let split = if splittable {
            let frontier: Vec<LeafStats> = current.values().cloned().collect();
            chooser.choose(train, &rows, &frontier)?
        } else {
            None
        };
        match split {
            Some((rule, left, right)) => {
                let (li, ri) = (slots.len(), slots.len() + 1);
                current.insert(li, LeafStats::from_rows(li, train, &left));
                current.insert(ri, LeafStats::from_rows(ri, train, &right));
                slots.push(Slot::Pending(left));
                slots.push(Slot::Pending(right));
                queue.push_back(li);
                queue.push_back(ri);
                slots[at] = Slot::Done(Node::Split {
                    rule,
                    left: li,
                    right: ri,
                    n_samples: rows.len(),
                });
            }
            None => {
                stats.leaf_id = next_leaf;
                next_leaf += 1;
                current.insert(at, stats.clone());
                slots[at] = Slot::Done(Node::Leaf(stats));
            }
        }
    }

    let nodes: Vec<Node> = slots
        .into_iter()
        .map(|s| match s {
            Slot::Done(n) => n,
            Slot::Pending(_) => unreachable!("queue drained"),
        })
        .collect();
    let mut leaf_predictions = vec![0.0; next_leaf];
    for node in &nodes {
        if let Node::Leaf(s) = node {
            leaf_predictions[s.leaf_id] = s.mean;
        }
    }
    Ok(TreeModel {
        feature_names: train.feature_names.clone(),
        nodes,
        leaf_predictions,
        config: config.clone(),
        js_diagnostics: None,
    })
}

/// Grows a CART tree with sample-mean leaves.
pub fn fit_cart(train: &Dataset, config: &InductionConfig) -> Result<TreeModel, TreeError> {
    let mut chooser = CartChooser {
        min_leaf: config.effective_min_leaf(),
    };
    grow(train, config, &mut chooser)
}

/// Fits any of the four tree methods.
pub fn fit(train: &Dataset, config: &InductionConfig) -> Result<TreeModel, TreeError> {
    match config.method {
        Method::Cart => fit_cart(train, config),
        Method::PJsrt => {
            let cart = fit_cart(train, config)?;
            crate::shrinkage::apply_js_to_leaves(&cart, config.js_config()?)
        }
        Method::CJsrt | Method::CpJsrt => crate::construction::fit_js_tree(train, config),
    }
}
