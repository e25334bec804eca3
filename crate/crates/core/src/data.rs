//! Datasets, CSV ingestion, repeated k-fold plans and the MSE metric.

use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("target column {0} not present")]
    TargetColumnMissing(String),
    #[error("no rows left after dropping rows with missing values")]
    EmptyAfterFiltering,
    #[error("column `{0}` has no numeric values")]
    NonNumericColumn(String),
    #[error("dataset needs at least one feature column")]
    NoFeatures,
    #[error("invalid fold count k={k} for n={n}")]
    InvalidFoldCount { n: usize, k: usize },
    #[error("repeat count must be at least 1")]
    InvalidRepeats,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("dataset shape is inconsistent: {0}")]
    InvalidShape(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Numeric feature matrix (row-major) with one real-valued target per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub target_name: String,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        features: Vec<f64>,
        targets: Vec<f64>,
    ) -> Result<Self, DataError> {
        let d = feature_names.len();
        if d == 0 {
            return Err(DataError::NoFeatures);
        }
        if targets.is_empty() {
            return Err(DataError::EmptyInput);
        }
        if features.len() != d * targets.len() {
            return Err(DataError::InvalidShape(format!(
                "{} feature values for {} rows of {} columns",
                features.len(),
                targets.len(),
                d
            )));
        }
        if features.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(DataError::InvalidShape("non-finite value".into()));
        }
        Ok(Dataset {
            feature_names,
            target_name: target_name.into(),
            features,
            targets,
        })
    }

    /// Builds a dataset from rows, naming features `x0..x{d-1}`.
    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self, DataError> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != targets.len() {
            return Err(DataError::LengthMismatch {
                left: rows.len(),
                right: targets.len(),
            });
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(DataError::InvalidShape("ragged rows".into()));
        }
        let names = (0..d).map(|j| format!("x{j}")).collect();
        Self::new(names, "y", rows.concat(), targets)
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.features[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn value(&self, i: usize, feature: usize) -> f64 {
        self.features[i * self.n_features() + feature]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    /// Copies the given rows into a new dataset, preserving their order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features());
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            features,
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// How the target column is identified in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

impl std::fmt::Display for TargetColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetColumn::Index(i) => write!(f, "#{i}"),
            TargetColumn::Name(s) => write!(f, "`{s}`"),
        }
    }
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    /// All-digit strings are column indices, anything else is a header name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads a comma-separated file. Rows with an empty or unparseable cell in
/// any used column are dropped. A feature column in which no cell parses is
/// treated as categorical and rejected.
pub fn load_csv(
    path: impl AsRef<Path>,
    target: &TargetColumn,
    header: bool,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::FileNotFound(path.display().to_string()));
    }
    let reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .from_reader(File::open(path)?);
    read_csv(reader, target, header)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(
    mut reader: csv::Reader<R>,
    target: &TargetColumn,
    header: bool,
) -> Result<Dataset, DataError> {
    let headers: Option<Vec<String>> = if header {
        Some(reader.headers()?.iter().map(|s| s.trim().to_string()).collect())
    } else {
        None
    };
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;
    let width = match &headers {
        Some(h) => h.len(),
        None => records.first().map_or(0, |r| r.len()),
    };
    let target_idx = match target {
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Name(name) => headers
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| DataError::TargetColumnMissing(target.to_string()))?,
        _ => return Err(DataError::TargetColumnMissing(target.to_string())),
    };
    let names: Vec<String> = match &headers {
        Some(h) => h.clone(),
        None => (0..width).map(|j| format!("x{j}")).collect(),
    };
    let feature_cols: Vec<usize> = (0..width).filter(|&j| j != target_idx).collect();
    if feature_cols.is_empty() {
        return Err(DataError::NoFeatures);
    }

    let parsed: Vec<Vec<Option<f64>>> = records
        .iter()
        .map(|r| (0..width).map(|j| r.get(j).and_then(parse_cell)).collect())
        .collect();
    if !parsed.is_empty() {
        for &j in &feature_cols {
            if parsed.iter().all(|row| row[j].is_none()) {
                return Err(DataError::NonNumericColumn(names[j].clone()));
            }
        }
    }

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for row in &parsed {
        let Some(y) = row[target_idx] else { continue };
        let xs: Option<Vec<f64>> = feature_cols.iter().map(|&j| row[j]).collect();
        if let Some(xs) = xs {
            features.extend(xs);
            targets.push(y);
        }
    }
    if targets.is_empty() {
        return Err(DataError::EmptyAfterFiltering);
    }
    Dataset::new(
        feature_cols.iter().map(|&j| names[j].clone()).collect(),
        names[target_idx].clone(),
        features,
        targets,
    )
}

/// Fold assignments for repeated k-fold cross validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    /// `assignments[r][i]` is the fold of sample `i` in repeat `r`.
    pub assignments: Vec<Vec<u32>>,
}

impl FoldPlan {
    pub fn n_samples(&self) -> usize {
        self.assignments.first().map_or(0, Vec::len)
    }

    /// Train and test indices (ascending) for one fold of one repeat.
    pub fn split(&self, repeat: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments[repeat].iter().enumerate() {
            if f as usize == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Each repeat shuffles `0..n` with its own ChaCha stream (stream id = repeat
/// index) and deals positions round-robin into `k` folds.
pub fn make_folds(n: usize, k: usize, repeats: usize, seed: u64) -> Result<FoldPlan, DataError> {
    if k < 2 || k > n {
        return Err(DataError::InvalidFoldCount { n, k });
    }
    if repeats == 0 {
        return Err(DataError::InvalidRepeats);
    }
    let assignments = (0..repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut fold = vec![0u32; n];
            for (pos, &i) in order.iter().enumerate() {
                fold[i] = (pos % k) as u32;
            }
            fold
        })
        .collect();
    Ok(FoldPlan {
        k,
        repeats,
        seed,
        assignments,
    })
}

pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64, DataError> {
    if predictions.len() != targets.len() {
        return Err(DataError::LengthMismatch {
            left: predictions.len(),
            right: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn csv_reader(text: &str, header: bool) -> csv::Reader<&[u8]> {
        csv::ReaderBuilder::new()
            .has_headers(header)
            .flexible(true)
            .from_reader(text.as_bytes())
    }

    #[test]
    fn drops_row_with_empty_feature() {
        let text = "a,b,y\n1,2,3\n4,,6\n7,8,9\n";
        let ds = read_csv(csv_reader(text, true), &"y".parse().unwrap(), true).unwrap();
        assert_eq!(ds.n_samples(), 2);
        assert_eq!(ds.row(1), &[7.0, 8.0]);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
    }

    #[test]
    fn all_targets_missing_is_empty() {
        let text = "1,2,\n3,4,?\n";
        let err = read_csv(csv_reader(text, false), &TargetColumn::Index(2), false).unwrap_err();
        assert!(matches!(err, DataError::EmptyAfterFiltering));
    }

    #[test]
    fn missing_target_column() {
        let text = "a,b\n1,2\n";
        let err = read_csv(csv_reader(text, true), &"y".parse().unwrap(), true).unwrap_err();
        assert!(matches!(err, DataError::TargetColumnMissing(_)));
        let err = read_csv(csv_reader(text, true), &TargetColumn::Index(5), true).unwrap_err();
        assert!(matches!(err, DataError::TargetColumnMissing(_)));
    }

    #[test]
    fn categorical_column_rejected() {
        let text = "a,name,y\n1,ford,2\n3,bmw,4\n";
        let err = read_csv(csv_reader(text, true), &"y".parse().unwrap(), true).unwrap_err();
        assert!(matches!(err, DataError::NonNumericColumn(c) if c == "name"));
    }

    #[test]
    fn non_finite_cells_count_as_missing() {
        let text = "1,NaN,3\n1,inf,3\n1,2,3\n";
        let ds = read_csv(csv_reader(text, false), &TargetColumn::Index(2), false).unwrap();
        assert_eq!(ds.n_samples(), 1);
    }

    #[test]
    fn auto_mpg_shape_keeps_392_rows() {
        // 398 rows, six with '?' horsepower, mirrors the UCI auto_mpg layout
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "mpg,cylinders,displacement,horsepower,weight,acceleration,model_year,origin").unwrap();
        let missing = [32usize, 126, 330, 336, 354, 374];
        for i in 0..398 {
            let hp = if missing.contains(&i) { "?".to_string() } else { format!("{}", 60 + i % 150) };
            writeln!(file, "{},{},{},{hp},{},{},{},{}", 10 + i % 30, 4 + i % 5, 100 + i, 2000 + i, 12 + i % 10, 70 + i % 13, 1 + i % 3).unwrap();
        }
        let ds = load_csv(file.path(), &"mpg".parse().unwrap(), true).unwrap();
        assert_eq!(ds.n_samples(), 392);
        assert_eq!(ds.n_features(), 7);
    }

    #[test]
    fn file_not_found() {
        let err = load_csv("/nonexistent/data.csv", &TargetColumn::Index(0), false).unwrap_err();
        assert!(matches!(err, DataError::FileNotFound(_)));
    }

    #[test]
    fn folds_of_one() {
        let plan = make_folds(10, 10, 1, 0).unwrap();
        let mut counts = [0; 10];
        for &f in &plan.assignments[0] {
            counts[f as usize] += 1;
        }
        assert_eq!(counts, [1; 10]);
    }

    #[test]
    fn uneven_fold_sizes() {
        let plan = make_folds(25, 10, 1, 3).unwrap();
        let mut counts = [0; 10];
        for &f in &plan.assignments[0] {
            counts[f as usize] += 1;
        }
        assert_eq!(counts, [3, 3, 3, 3, 3, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn bad_fold_counts() {
        assert!(matches!(make_folds(5, 6, 1, 0), Err(DataError::InvalidFoldCount { .. })));
        assert!(matches!(make_folds(5, 1, 1, 0), Err(DataError::InvalidFoldCount { .. })));
        assert!(matches!(make_folds(5, 2, 0, 0), Err(DataError::InvalidRepeats)));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 5.0);
        assert_eq!(mse(&[2.0], &[5.0]).unwrap(), 9.0);
        assert!(matches!(mse(&[1.0], &[1.0, 2.0]), Err(DataError::LengthMismatch { .. })));
        assert!(matches!(mse(&[], &[]), Err(DataError::EmptyInput)));
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(n in 2usize..300, k_frac in 0.0f64..1.0, repeats in 1usize..4, seed: u64) {
            let k = 2 + ((n - 2) as f64 * k_frac) as usize;
            let plan = make_folds(n, k, repeats, seed).unwrap();
            prop_assert_eq!(&plan, &make_folds(n, k, repeats, seed).unwrap());
            for r in 0..repeats {
                let mut counts = vec![0usize; k];
                for &f in &plan.assignments[r] {
                    counts[f as usize] += 1;
                }
                let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                prop_assert!(*lo >= 1 && hi - lo <= 1);
                let mut seen: Vec<usize> = (0..k).flat_map(|f| plan.split(r, f).1).collect();
                seen.sort_unstable();
                prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn mse_properties(v in prop::collection::vec(-1e6f64..1e6, 1..50), w in prop::collection::vec(-1e6f64..1e6, 50)) {
            let w = &w[..v.len()];
            prop_assert_eq!(mse(&v, &v).unwrap(), 0.0);
            let a = mse(&v, w).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert_eq!(a, mse(w, &v).unwrap());
        }
    }
}
