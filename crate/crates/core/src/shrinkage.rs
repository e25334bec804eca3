//! Positive-part James-Stein estimation of leaf means with unequal
//! variances, and its use for leaf prediction.
//!
//! For `m` groups with sample means `ỹ_i`, sizes `n_i` and unbiased variances
//! `σ_i²`:
//!
//! ```text
//! GM     = (1/m) Σ ỹ_i
//! γ      = (m - 3) / Σ (n_i / σ_i²) (ỹ_i - GM)²
//! est_i  = GM + (1 - λγ)⁺ (ỹ_i - GM)
//! ```
//!
//! `λ = 1` is the plain estimator used for leaf prediction; larger `λ`
//! pulls harder toward `GM` and is used during split selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{JsDiagnostics, LeafStats, Method, TreeError, TreeModel};

#[derive(Debug, Error, PartialEq)]
pub enum JsError {
    #[error("James-Stein estimation needs at least {required} groups, got {m}")]
    TooFewGroups { m: usize, required: usize },
    #[error("invalid leaf statistics: {0}")]
    InvalidStats(String),
    #[error("result does not come from a James-Stein estimate")]
    NotJsEstimate,
    #[error("invalid JS configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsConfig {
    pub lambda: f64,
    /// Lower bound substituted for σ² in the γ denominator.
    pub variance_floor: f64,
    pub min_groups_js: usize,
}

impl Default for JsConfig {
    fn default() -> Self {
        JsConfig {
            lambda: 1.0,
            variance_floor: 1e-12,
            min_groups_js: 4,
        }
    }
}

impl JsConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        JsConfig {
            lambda,
            ..JsConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), JsError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(JsError::InvalidConfig(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        if !(self.variance_floor > 0.0) {
            return Err(JsError::InvalidConfig("variance_floor must be positive".into()));
        }
        if self.min_groups_js < 4 {
            return Err(JsError::InvalidConfig("min_groups_js must be at least 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsResult {
    pub estimates: Vec<f64>,
    pub grand_mean: f64,
    /// May be `+∞` when every group mean equals the grand mean.
    pub gamma: f64,
    pub shrink_factor: f64,
    pub used_js: bool,
}

impl JsResult {
    /// Plain sample means, no shrinkage applied.
    pub fn mle(groups: &[LeafStats]) -> Self {
        JsResult {
            estimates: groups.iter().map(|g| g.mean).collect(),
            grand_mean: grand_mean(groups),
            gamma: 0.0,
            shrink_factor: 1.0,
            used_js: false,
        }
    }
}

fn check_groups(groups: &[LeafStats]) -> Result<(), JsError> {
    for g in groups {
        if g.n < 2 {
            return Err(JsError::InvalidStats(format!("leaf {} has n = {}", g.leaf_id, g.n)));
        }
        if !(g.variance >= 0.0) || !g.mean.is_finite() {
            return Err(JsError::InvalidStats(format!(
                "leaf {} has mean {} and variance {}",
                g.leaf_id, g.mean, g.variance
            )));
        }
    }
    Ok(())
}

/// Unweighted mean of the group means.
pub fn grand_mean(groups: &[LeafStats]) -> f64 {
    groups.iter().map(|g| g.mean).sum::<f64>() / groups.len() as f64
}

pub fn js_gamma(groups: &[LeafStats], variance_floor: f64) -> Result<f64, JsError> {
    let m = groups.len();
    if m < 4 {
        return Err(JsError::TooFewGroups { m, required: 4 });
    }
    check_groups(groups)?;
    let gm = grand_mean(groups);
    let denom: f64 = groups
        .iter()
        .map(|g| {
            let dev = g.mean - gm;
            g.n as f64 / g.variance.max(variance_floor) * dev * dev
        })
        .sum();
    Ok(if denom == 0.0 {
        f64::INFINITY
    } else {
        (m - 3) as f64 / denom
    })
}

/// `(1 - λγ)⁺`, with `λ = 0` meaning no shrinkage even when `γ = +∞`.
pub fn shrink_factor(lambda: f64, gamma: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else if gamma.is_infinite() {
        0.0
    } else {
        (1.0 - lambda * gamma).max(0.0)
    }
}

pub fn js_shrink(groups: &[LeafStats], config: &JsConfig) -> Result<JsResult, JsError> {
    let m = groups.len();
    let required = config.min_groups_js.max(4);
    if m < required {
        return Err(JsError::TooFewGroups { m, required });
    }
    let gamma = js_gamma(groups, config.variance_floor)?;
    let gm = grand_mean(groups);
    let factor = shrink_factor(config.lambda, gamma);
    let estimates = groups
        .iter()
        .map(|g| {
            if factor == 1.0 {
                g.mean
            } else if factor == 0.0 {
                gm
            } else {
                gm + factor * (g.mean - gm)
            }
        })
        .collect();
    Ok(JsResult {
        estimates,
        grand_mean: gm,
        gamma,
        shrink_factor: factor,
        used_js: true,
    })
}

/// Effective weight on the grand mean, `min(λγ, 1) = 1 - shrink_factor`.
pub fn shrink_weight(result: &JsResult) -> Result<f64, JsError> {
    if !result.used_js {
        return Err(JsError::NotJsEstimate);
    }
    Ok(1.0 - result.shrink_factor)
}

/// Replaces the leaf predictions of a fitted tree with joint JS estimates
/// (`λ = 1`) when it has more than three leaves; otherwise keeps the sample
/// means. The split structure is untouched.
pub fn apply_js_to_leaves(model: &TreeModel, config: &JsConfig) -> Result<TreeModel, TreeError> {
    config.validate()?;
    let stats: Vec<LeafStats> = model.leaves().into_iter().cloned().collect();
    let mut out = model.clone();
    out.config.method = match model.config.method {
        Method::Cart => Method::PJsrt,
        Method::CJsrt => Method::CpJsrt,
        m => m,
    };
    if out.config.js.is_none() {
        out.config.js = Some(config.clone());
    }
    let plain = JsConfig {
        lambda: 1.0,
        ..config.clone()
    };
    let result = if stats.len() > 3 && stats.len() >= plain.min_groups_js {
        js_shrink(&stats, &plain)?
    } else {
        JsResult::mle(&stats)
    };
    out.leaf_predictions = result.estimates.clone();
    out.js_diagnostics = Some(JsDiagnostics {
        used_js: result.used_js,
        grand_mean: result.grand_mean,
        gamma: result.gamma,
        shrink_factor: result.shrink_factor,
        shrink_weight: if result.used_js { 1.0 - result.shrink_factor } else { 0.0 },
    });
    Ok(out)
}
