//! Versioned JSON model files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{Node, TreeModel};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    model: TreeModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u64,
}

pub fn model_to_json(model: &TreeModel) -> String {
    serde_json::to_string_pretty(&ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        model: model.clone(),
    })
    .expect("tree models always serialize")
}

pub fn model_from_json(text: &str) -> Result<TreeModel, ModelIoError> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| ModelIoError::CorruptModel(e.to_string()))?;
    if probe.schema_version != MODEL_SCHEMA_VERSION as u64 {
        return Err(ModelIoError::SchemaVersionMismatch {
            found: probe.schema_version,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| ModelIoError::CorruptModel(e.to_string()))?;
    check_structure(&file.model)?;
    Ok(file.model)
}

pub fn save_model(model: &TreeModel, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TreeModel, ModelIoError> {
    model_from_json(&fs::read_to_string(path)?)
}

/// Every node reachable exactly once from the root, every leaf id in range
/// and used once.
fn check_structure(model: &TreeModel) -> Result<(), ModelIoError> {
    let corrupt = |msg: String| Err(ModelIoError::CorruptModel(msg));
    let n = model.nodes.len();
    if n == 0 {
        return corrupt("no nodes".into());
    }
    let mut seen = vec![false; n];
    let mut leaf_seen = vec![false; model.leaf_predictions.len()];
    let mut stack = vec![0usize];
    while let Some(at) = stack.pop() {
        if at >= n || seen[at] {
            return corrupt(format!("node {at} is out of range or shared"));
        }
        seen[at] = true;
        match &model.nodes[at] {
            Node::Split { rule, left, right, .. } => {
                if rule.feature >= model.n_features() || !rule.threshold.is_finite() {
                    return corrupt(format!("node {at} has an invalid split rule"));
                }
                stack.push(*right);
                stack.push(*left);
            }
            Node::Leaf(s) => match leaf_seen.get_mut(s.leaf_id) {
                Some(flag) if !*flag => *flag = true,
                _ => return corrupt(format!("leaf id {} is out of range or repeated", s.leaf_id)),
            },
        }
    }
    if seen.iter().any(|s| !s) || leaf_seen.iter().any(|s| !s) {
        return corrupt("unreachable nodes or unused leaf predictions".into());
    }
    Ok(())
}

/// Serializes `f64` as a JSON number, or the strings `"inf"`, `"-inf"` and
/// `"nan"` for values JSON cannot hold.
pub mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("invalid number `{other}`"))),
            },
        }
    }
}
