//! Regression trees whose leaf values and split choices can borrow strength
//! across leaves through James-Stein shrinkage toward the grand mean of leaf
//! means.
//!
//! Four tree methods share one grower:
//!
//! * `CART`: sample-mean leaves, squared-error splits.
//! * `P-JSRT`: a CART structure whose leaf values are shrunk jointly.
//! * `C-JSRT`: splits scored with children shrunk jointly with the other
//!   current leaves (strength set by `λ`), sample-mean leaves.
//! * `CP-JSRT`: both.
//!
//! [`baselines`] holds the k-nearest-neighbor and inverse-distance
//! predictors used for comparison, and [`bench`] the repeated k-fold
//! benchmark harness.

pub mod baselines;
pub mod bench;
pub mod construction;
pub mod data;
pub mod persist;
pub mod shrinkage;
pub mod split;
pub mod synthetic;
pub mod tree;

pub use baselines::{kernel_predict, knn_predict, NeighborConfig, NeighborError};
pub use construction::{fit_js_tree, js_best_split, Frontier, JsSplitOutcome};
pub use data::{load_csv, make_folds, mse, DataError, Dataset, FoldPlan, TargetColumn};
pub use persist::{load_model, save_model, ModelIoError};
pub use shrinkage::{apply_js_to_leaves, js_gamma, js_shrink, shrink_weight, JsConfig, JsError, JsResult};
pub use split::{best_split, SplitCandidate, SplitRule};
pub use tree::{fit, fit_cart, InductionConfig, LeafStats, Method, Node, TreeError, TreeModel};
