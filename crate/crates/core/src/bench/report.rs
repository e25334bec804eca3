use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BenchMethod, RunSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub repeat: usize,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub mse: f64,
    /// Wall time to predict the whole test partition.
    pub predict_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_leaves: Option<usize>,
    /// Weight on the grand mean when JS leaf prediction was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrink_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: BenchMethod,
    pub mse_mean: f64,
    pub mse_std: f64,
    /// Median over folds of the per-fold prediction time.
    pub predict_ms_median: f64,
    pub predict_ms_total: f64,
    pub folds: Vec<FoldRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub name: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub methods: Vec<MethodSummary>,
    /// `100 (MSE_CART - MSE_method) / MSE_CART` for each JS method, when
    /// CART was run.
    pub mse_reduction_pct: BTreeMap<BenchMethod, f64>,
    /// Mean P-JSRT shrink weight over folds where JS was applied.
    pub avg_shrink_weight: Option<f64>,
    pub js_fold_count: usize,
}

impl DatasetReport {
    pub fn method(&self, m: BenchMethod) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    pub fn reduction(&self, m: BenchMethod) -> Option<f64> {
        self.mse_reduction_pct.get(&m).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub kind: String,
    pub spec: RunSpec,
    pub datasets: Vec<DatasetReport>,
}

impl BenchmarkReport {
    pub fn dataset(&self, name: &str) -> Option<&DatasetReport> {
        self.datasets.iter().find(|d| d.name == name)
    }

    /// Copy with every timing field zeroed; the rest is deterministic given
    /// the run settings.
    pub fn without_timings(&self) -> BenchmarkReport {
        let mut r = self.clone();
        for d in &mut r.datasets {
            for m in &mut d.methods {
                m.predict_ms_median = 0.0;
                m.predict_ms_total = 0.0;
                for f in &mut m.folds {
                    f.predict_ms = 0.0;
                }
            }
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// MSE and timing tables, one row per dataset.
    pub fn render(&self) -> String {
        let methods: Vec<BenchMethod> = {
            let mut all: Vec<BenchMethod> = self
                .datasets
                .iter()
                .flat_map(|d| d.methods.iter().map(|m| m.method))
                .collect();
            all.sort();
            all.dedup();
            all
        };
        let width = self.datasets.iter().map(|d| d.name.len()).max().unwrap_or(7).max(7);
        let mut out = String::new();
        let header = |out: &mut String, title: &str| {
            let _ = writeln!(out, "{title}");
            let _ = write!(out, "{:<width$} {:>8}", "dataset", "samples");
            for m in &methods {
                let _ = write!(out, " {:>12}", m.name());
            }
            out.push('\n');
        };

        header(&mut out, "Mean test MSE");
        for d in &self.datasets {
            let _ = write!(out, "{:<width$} {:>8}", d.name, d.n_samples);
            for m in &methods {
                match d.method(*m) {
                    Some(s) => {
                        let _ = write!(out, " {:>12.6}", s.mse_mean);
                    }
                    None => {
                        let _ = write!(out, " {:>12}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
        header(&mut out, "Median prediction time per fold (ms)");
        for d in &self.datasets {
            let _ = write!(out, "{:<width$} {:>8}", d.name, d.n_samples);
            for m in &methods {
                match d.method(*m) {
                    Some(s) => {
                        let _ = write!(out, " {:>12.4}", s.predict_ms_median);
                    }
                    None => {
                        let _ = write!(out, " {:>12}", "-");
                    }
                }
            }
            out.push('\n');
        }
        let reductions: Vec<&DatasetReport> =
            self.datasets.iter().filter(|d| !d.mse_reduction_pct.is_empty()).collect();
        if !reductions.is_empty() {
            out.push('\n');
            let _ = writeln!(out, "MSE reduction vs CART (%)");
            for d in reductions {
                let _ = write!(out, "{:<width$}", d.name);
                for (m, v) in &d.mse_reduction_pct {
                    let _ = write!(out, "  {m}: {v:+.4}");
                }
                if let Some(w) = d.avg_shrink_weight {
                    let _ = write!(out, "  shrink weight: {w:.6}");
                }
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageRecord {
    pub dataset: String,
    pub avg_shrink_weight: f64,
    pub mse_reduction_pct: f64,
    pub js_fold_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageReport {
    pub schema_version: u32,
    pub kind: String,
    pub records: Vec<ShrinkageRecord>,
    /// Pearson correlation between shrink weight and MSE reduction.
    pub pcc: f64,
    pub positive_correlation: bool,
    /// Datasets where no fold had more than three leaves.
    pub excluded: Vec<String>,
}

impl ShrinkageReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn render(&self) -> String {
        let width = self.records.iter().map(|r| r.dataset.len()).max().unwrap_or(7).max(7);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$} {:>14} {:>16}", "dataset", "shrink weight", "MSE reduce (%)");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{:<width$} {:>14.6} {:>16.4}",
                r.dataset, r.avg_shrink_weight, r.mse_reduction_pct
            );
        }
        let _ = writeln!(out, "PCC = {:.4}", self.pcc);
        for name in &self.excluded {
            let _ = writeln!(out, "warning: {name} excluded, JS never applied");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub lambda: f64,
    /// The λ = 0 row added by the harness.
    pub control: bool,
    pub c_jsrt_mse: f64,
    pub cp_jsrt_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAblation {
    pub name: String,
    pub n_samples: usize,
    pub cart_mse: f64,
    pub p_jsrt_mse: f64,
    /// λ with the lowest C-JSRT MSE (smallest λ on ties), control included.
    pub best_lambda: f64,
    pub c_jsrt_mse: f64,
    pub cp_jsrt_mse: f64,
    pub sweep: Vec<AblationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub schema_version: u32,
    pub kind: String,
    pub spec: RunSpec,
    /// Column order of the summary table.
    pub columns: Vec<BenchMethod>,
    pub datasets: Vec<DatasetAblation>,
}

impl AblationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn render(&self) -> String {
        let width = self.datasets.iter().map(|d| d.name.len()).max().unwrap_or(7).max(7);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "dataset");
        for c in &self.columns {
            let _ = write!(out, " {:>12}", c.name());
        }
        let _ = writeln!(out, " {:>8}", "lambda");
        for d in &self.datasets {
            let _ = writeln!(
                out,
                "{:<width$} {:>12.6} {:>12.6} {:>12.6} {:>12.6} {:>8}",
                d.name, d.cart_mse, d.p_jsrt_mse, d.c_jsrt_mse, d.cp_jsrt_mse, d.best_lambda
            );
        }
        out
    }
}
