//! Tabular classification data: ingestion, validation, fold assignment and
//! column projection.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::LearnerSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("i/o error reading {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("response column `{0}` not present in header")]
    MissingResponseColumn(String),
    #[error("non-numeric value `{value}` at row {row}, column {col} (`{name}`)")]
    NonNumericFeature {
        row: usize,
        col: usize,
        name: String,
        value: String,
    },
    #[error("non-finite value `{value}` at row {row}, column {col} (`{name}`)")]
    NonFiniteFeature {
        row: usize,
        col: usize,
        name: String,
        value: String,
    },
    #[error("missing value at row {row}, column {col} (`{name}`)")]
    MissingValue {
        row: usize,
        col: usize,
        name: String,
    },
    #[error("response has a single class; at least two are required")]
    SingleClassResponse,
    #[error("dataset needs at least 2 rows and 1 attribute (got n={n}, p={p})")]
    TooSmall { n: usize, p: usize },
    #[error("duplicate or empty attribute name `{0}`")]
    BadAttributeName(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid fold count {k} for {n} rows (need 2 <= k <= n)")]
    InvalidFoldCount { k: usize, n: usize },
    #[error("attribute index {index} out of range for p={p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("test fraction {0} outside [0, 1)")]
    InvalidTestFraction(f64),
}

/// Immutable classification dataset.
///
/// Class labels are coded densely in order of first appearance. Row subsets
/// produced by [`Dataset::select_rows`] keep the parent's label set so codes
/// stay comparable across partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    class_labels: Vec<String>,
    attribute_names: Vec<String>,
}

/// Metadata echoed into reproducibility logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub p: usize,
    pub attribute_names: Vec<String>,
    pub class_labels: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from a feature matrix and raw string labels.
    pub fn new<S: AsRef<str>>(
        features: Array2<f64>,
        response: &[S],
        attribute_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let mut class_labels: Vec<String> = Vec::new();
        let mut codes: HashMap<&str, usize> = HashMap::new();
        let mut labels = Vec::with_capacity(response.len());
        for label in response {
            let label = label.as_ref();
            let next = codes.len();
            let code = *codes.entry(label).or_insert_with(|| {
                class_labels.push(label.to_string());
                next
            });
            labels.push(code);
        }
        Self::from_codes(features, labels, class_labels, attribute_names)
    }

    /// Builds a dataset from pre-coded labels. Every code in
    /// `0..class_labels.len()` must occur.
    pub fn from_codes(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_labels: Vec<String>,
        attribute_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let (n, p) = features.dim();
        if labels.len() != n {
            return Err(DatasetError::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                n
            )));
        }
        if attribute_names.len() != p {
            return Err(DatasetError::Shape(format!(
                "{} attribute names for {} columns",
                attribute_names.len(),
                p
            )));
        }
        if n < 2 || p < 1 {
            return Err(DatasetError::TooSmall { n, p });
        }
        let mut seen = std::collections::HashSet::new();
        for name in &attribute_names {
            if name.is_empty() || !seen.insert(name.as_str()) {
                return Err(DatasetError::BadAttributeName(name.clone()));
            }
        }
        if let Some(((row, col), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DatasetError::NonFiniteFeature {
                row,
                col,
                name: attribute_names[col].clone(),
                value: v.to_string(),
            });
        }
        let mut counts = vec![0usize; class_labels.len()];
        for &code in &labels {
            if code >= class_labels.len() {
                return Err(DatasetError::Shape(format!(
                    "label code {code} without a class name"
                )));
            }
            counts[code] += 1;
        }
        if counts.contains(&0) {
            return Err(DatasetError::Shape("class label with no instances".into()));
        }
        if class_labels.len() < 2 {
            return Err(DatasetError::SingleClassResponse);
        }
        Ok(Dataset {
            features,
            labels,
            class_labels,
            attribute_names,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    /// Dense class codes, one per row.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attribute_names.iter().position(|a| a == name)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            n: self.n(),
            p: self.p(),
            attribute_names: self.attribute_names.clone(),
            class_labels: self.class_labels.clone(),
        }
    }

    /// Row subset in the given order. The label set is inherited.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            class_labels: self.class_labels.clone(),
            attribute_names: self.attribute_names.clone(),
        }
    }

    /// Projects onto the attributes of `spec`, in its sorted index order.
    pub fn subset_columns(&self, spec: &LearnerSpec) -> Result<DatasetView<'_>, DatasetError> {
        let p = self.p();
        if let Some(&index) = spec.indices().iter().find(|&&i| i >= p) {
            return Err(DatasetError::IndexOutOfRange { index, p });
        }
        Ok(DatasetView {
            dataset: self,
            features: self.features.select(Axis(1), spec.indices()),
            spec: spec.clone(),
        })
    }

    /// Stratified k-fold assignment.
    ///
    /// Rows of each class are shuffled, the classes are concatenated in code
    /// order and position `i` of the concatenation goes to fold `i mod k`.
    /// That keeps both overall and per-class fold counts within one of each
    /// other.
    pub fn stratified_folds<R: Rng + ?Sized>(
        &self,
        k: usize,
        rng: &mut R,
    ) -> Result<FoldAssignment, DatasetError> {
        let n = self.n();
        if k < 2 || k > n {
            return Err(DatasetError::InvalidFoldCount { k, n });
        }
        let mut fold_of = vec![0usize; n];
        let mut position = 0usize;
        for mut members in self.rows_by_class() {
            members.shuffle(rng);
            for row in members {
                fold_of[row] = position % k;
                position += 1;
            }
        }
        Ok(FoldAssignment { fold_of, k })
    }

    /// Stratified train/test partition. Each class sends
    /// `round(count * test_fraction)` rows to the test side but always keeps at
    /// least one row for training. Both index lists are ascending.
    pub fn stratified_split<R: Rng + ?Sized>(
        &self,
        test_fraction: f64,
        rng: &mut R,
    ) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(DatasetError::InvalidTestFraction(test_fraction));
        }
        let mut train = Vec::new();
        let mut test = Vec::new();
        for mut members in self.rows_by_class() {
            members.shuffle(rng);
            let n_test =
                ((members.len() as f64 * test_fraction).round() as usize).min(members.len() - 1);
            test.extend_from_slice(&members[..n_test]);
            train.extend_from_slice(&members[n_test..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }

    fn rows_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_classes()];
        for (row, &c) in self.labels.iter().enumerate() {
            groups[c].push(row);
        }
        groups
    }

    /// Reads a comma-separated file with a header row.
    pub fn load_csv<P: AsRef<Path>>(path: P, response_column: &str) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut file = File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => DatasetError::FileNotFound(display.clone()),
            _ => DatasetError::Io {
                path: display.clone(),
                message: e.to_string(),
            },
        })?;
        let mut text = String::new();
        file.read_to_string(&mut text)
            .map_err(|e| DatasetError::Io {
                path: display,
                message: e.to_string(),
            })?;
        Self::from_csv_str(&text, response_column)
    }

    /// Parses CSV text. Row numbers in errors are 0-based data rows (the
    /// header is not counted); column numbers are 0-based file columns.
    pub fn from_csv_str(text: &str, response_column: &str) -> Result<Self, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| DatasetError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let response_col = header
            .iter()
            .position(|h| h == response_column)
            .ok_or_else(|| DatasetError::MissingResponseColumn(response_column.to_string()))?;
        let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != response_col).collect();
        let names: Vec<String> = feature_cols.iter().map(|&c| header[c].clone()).collect();

        let mut values = Vec::new();
        let mut response = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| DatasetError::Csv(e.to_string()))?;
            let label = &record[response_col];
            if label.is_empty() {
                return Err(DatasetError::MissingValue {
                    row,
                    col: response_col,
                    name: header[response_col].clone(),
                });
            }
            response.push(label.to_string());
            for &col in &feature_cols {
                let cell = &record[col];
                if cell.is_empty() {
                    return Err(DatasetError::MissingValue {
                        row,
                        col,
                        name: header[col].clone(),
                    });
                }
                let v: f64 = cell.parse().map_err(|_| DatasetError::NonNumericFeature {
                    row,
                    col,
                    name: header[col].clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(DatasetError::NonFiniteFeature {
                        row,
                        col,
                        name: header[col].clone(),
                        value: cell.to_string(),
                    });
                }
                values.push(v);
            }
        }
        let n = response.len();
        let features = Array2::from_shape_vec((n, names.len()), values)
            .map_err(|e| DatasetError::Shape(e.to_string()))?;
        let distinct: std::collections::HashSet<&String> = response.iter().collect();
        if n > 0 && distinct.len() < 2 {
            return Err(DatasetError::SingleClassResponse);
        }
        Self::new(features, &response, names)
    }

    /// Canonical CSV: attributes in order, response last, shortest
    /// round-trip float formatting.
    pub fn to_csv_string(&self, response_column: &str) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.attribute_names.iter().map(String::as_str).collect();
        header.push(response_column);
        writer.write_record(&header).expect("in-memory write");
        for (row, label) in self.features.rows().into_iter().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(self.class_labels[*label].clone());
            writer.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// Fold membership for one k-fold partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    /// Held-out rows of fold `f`, ascending.
    pub fn held_out(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == f)
            .collect()
    }

    /// Training rows (complement of fold `f`), ascending.
    pub fn training(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != f)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// A dataset restricted to the columns of one learner spec.
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    dataset: &'a Dataset,
    features: Array2<f64>,
    spec: LearnerSpec,
}

impl<'a> DatasetView<'a> {
    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &'a [usize] {
        self.dataset.labels()
    }

    pub fn n_classes(&self) -> usize {
        self.dataset.n_classes()
    }

    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }
}
