//! Repeated k-fold benchmark harness.
//!
//! A [`RunSpec`] names datasets (CSV files or bundled synthetic problems),
//! methods and protocol parameters. [`run_cv`] produces MSE and prediction
//! timing per method, [`shrinkage_analysis`] relates the average shrink
//! weight of P-JSRT to its MSE reduction over CART, and [`ablation`] sweeps
//! λ for the construction-stage methods.

mod report;
mod run;
mod stats;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::NeighborError;
use crate::data::{load_csv, DataError, Dataset, TargetColumn};
use crate::synthetic::SyntheticSpec;
use crate::tree::{Method, TreeError};

pub use report::{
    AblationReport, AblationRow, BenchmarkReport, DatasetAblation, DatasetReport, FoldRecord,
    MethodSummary, ShrinkageRecord, ShrinkageReport,
};
pub use run::{ablation, ablation_on, run_cv, run_cv_on, shrinkage_analysis, shrinkage_analysis_on};
pub use stats::{mean, median, pearson, sample_std};

pub const RUN_SPEC_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("failed to load dataset `{name}`: {source}")]
    DatasetLoad { name: String, source: DataError },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Neighbor(#[from] NeighborError),
    #[error("invalid run spec: {0}")]
    InvalidSpec(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("run spec schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Methods a benchmark can compare. Ordered as reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BenchMethod {
    #[serde(rename = "CART")]
    Cart,
    #[serde(rename = "P-JSRT")]
    PJsrt,
    #[serde(rename = "C-JSRT")]
    CJsrt,
    #[serde(rename = "CP-JSRT")]
    CpJsrt,
    #[serde(rename = "KNNRT")]
    Knnrt,
    #[serde(rename = "KRT")]
    Krt,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 6] = [
        BenchMethod::Cart,
        BenchMethod::PJsrt,
        BenchMethod::CJsrt,
        BenchMethod::CpJsrt,
        BenchMethod::Knnrt,
        BenchMethod::Krt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Knnrt => "KNNRT",
            BenchMethod::Krt => "KRT",
            m => m.tree_method().expect("tree method").name(),
        }
    }

    pub fn tree_method(self) -> Option<Method> {
        match self {
            BenchMethod::Cart => Some(Method::Cart),
            BenchMethod::PJsrt => Some(Method::PJsrt),
            BenchMethod::CJsrt => Some(Method::CJsrt),
            BenchMethod::CpJsrt => Some(Method::CpJsrt),
            BenchMethod::Knnrt | BenchMethod::Krt => None,
        }
    }
}

impl std::fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BenchMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        target: TargetColumn,
        #[serde(default = "default_true")]
        header: bool,
    },
    Synthetic { generator: SyntheticSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub source: DatasetSource,
}

impl DatasetSpec {
    pub fn csv(path: impl Into<PathBuf>, target: TargetColumn, header: bool) -> Self {
        DatasetSpec {
            name: None,
            source: DatasetSource::Csv {
                path: path.into(),
                target,
                header,
            },
        }
    }

    pub fn synthetic(spec: SyntheticSpec) -> Self {
        DatasetSpec {
            name: None,
            source: DatasetSource::Synthetic { generator: spec },
        }
    }

    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match &self.source {
            DatasetSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            DatasetSource::Synthetic { generator: s } => s.name.clone(),
        }
    }

    pub fn load(&self) -> Result<Dataset, BenchError> {
        match &self.source {
            DatasetSource::Csv { path, target, header } => {
                load_csv(path, target, *header).map_err(|source| BenchError::DatasetLoad {
                    name: self.display_name(),
                    source,
                })
            }
            DatasetSource::Synthetic { generator: s } => Ok(s.generate()),
        }
    }
}

/// A named dataset ready for benchmarking.
#[derive(Debug, Clone)]
pub struct NamedDataset {
    pub name: String,
    pub data: Dataset,
}

/// Benchmark protocol. Defaults: 10 folds, 10 repeats, seed 0, `min_split`
/// 20, `min_leaf` 5, `λ = 1`, 5 neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSpec {
    pub schema_version: u32,
    pub datasets: Vec<DatasetSpec>,
    pub methods: Vec<BenchMethod>,
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub min_split: usize,
    pub min_leaf: usize,
    /// λ used by C-JSRT and CP-JSRT in [`run_cv`].
    pub lambda: f64,
    /// λ values swept by [`ablation`].
    pub lambda_grid: Vec<f64>,
    pub knn_k: usize,
    /// Fit folds on a thread pool. Prediction timing always runs sequentially.
    pub parallel: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            schema_version: RUN_SPEC_VERSION,
            datasets: Vec::new(),
            methods: vec![BenchMethod::Cart, BenchMethod::PJsrt],
            k: 10,
            repeats: 10,
            seed: 0,
            min_split: 20,
            min_leaf: 5,
            lambda: 1.0,
            lambda_grid: Vec::new(),
            knn_k: 5,
            parallel: true,
        }
    }
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let spec: RunSpec = serde_json::from_str(text)?;
        if spec.schema_version != RUN_SPEC_VERSION {
            return Err(BenchError::SchemaVersionMismatch {
                found: spec.schema_version,
                expected: RUN_SPEC_VERSION,
            });
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, BenchError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks everything except the dataset list.
    pub fn validate_protocol(&self) -> Result<(), BenchError> {
        let bad = |msg: &str| Err(BenchError::InvalidSpec(msg.to_string()));
        if self.methods.is_empty() {
            return bad("no methods");
        }
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.min_split < 2 {
            return bad("min_split must be at least 2");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return bad("lambda grid values must be finite and >= 0");
        }
        if self.knn_k == 0 {
            return bad("knn_k must be at least 1");
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.datasets.is_empty() {
            return Err(BenchError::InvalidSpec("no datasets".into()));
        }
        self.validate_protocol()
    }

    pub fn load_datasets(&self) -> Result<Vec<NamedDataset>, BenchError> {
        self.datasets
            .iter()
            .map(|d| {
                Ok(NamedDataset {
                    name: d.display_name(),
                    data: d.load()?,
                })
            })
            .collect()
    }
}

/// Parses `start:end:step` (arithmetic sequence, end inclusive) or a
/// comma-separated list.
pub fn parse_lambda_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid number `{}` in lambda grid", s.trim()))
    };
    let grid: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, end, step] = parts[..] else {
            return Err(format!("expected start:end:step, got `{text}`"));
        };
        let (start, end, step) = (parse(start)?, parse(end)?, parse(step)?);
        if !(step > 0.0) || end < start {
            return Err(format!("empty lambda range `{text}`"));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        text.split(',').map(parse).collect::<Result<_, _>>()?
    };
    if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(format!("lambda grid `{text}` must hold finite values >= 0"));
    }
    Ok(grid)
}
