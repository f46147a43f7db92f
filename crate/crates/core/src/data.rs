//! Tabular datasets: CSV ingestion, z-score standardization, seeded
//! train/test splitting, one-vs-rest binarization and the two-Gaussian
//! artificial dataset.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Errors raised while building or reading a [`Dataset`].
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("label column `{0}` appears more than once in header")]
    DuplicateLabelColumn(String),
    #[error("non-numeric value `{value}` at line {line}, column `{column}` (only numeric features are supported)")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },
    #[error("non-finite value `{value}` at line {line}, column `{column}`")]
    NonFinite {
        line: u64,
        column: String,
        value: String,
    },
    #[error("dataset needs at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("dataset needs at least 2 distinct labels, found {0}")]
    TooFewClasses(usize),
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("row {row} has {found} values, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{0} labels for {1} rows")]
    LabelCount(usize, usize),
    #[error("label index {0} out of range for {1} classes")]
    LabelOutOfRange(usize, usize),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("split of {n} rows with fraction {fraction} leaves an empty partition")]
    EmptyPartition { n: usize, fraction: f64 },
    #[error("n_per_class must be at least 1")]
    EmptyArtificial,
    #[error("feature dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
}

/// Feature matrix with class labels and column metadata.
///
/// Labels are indices into `class_names`. For binary datasets index 1 is the
/// positive class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    column_names: Vec<String>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        column_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let d = column_names.len();
        if d == 0 {
            return Err(DataError::NoFeatures);
        }
        if features.len() != labels.len() {
            return Err(DataError::LabelCount(labels.len(), features.len()));
        }
        for (row, values) in features.iter().enumerate() {
            if values.len() != d {
                return Err(DataError::RaggedRow {
                    row,
                    expected: d,
                    found: values.len(),
                });
            }
            if let Some((col, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(DataError::NonFinite {
                    line: row as u64 + 2,
                    column: column_names[col].clone(),
                    value: v.to_string(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(DataError::LabelOutOfRange(bad, class_names.len()));
        }
        Ok(Self {
            features,
            labels,
            column_names,
            class_names,
        })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    /// Number of distinct labels actually present in the rows.
    pub fn n_present_classes(&self) -> usize {
        self.labels.iter().collect::<BTreeSet<_>>().len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    /// Rows at `indices`, in the given order. Metadata is shared.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Same labels and metadata with a replaced feature matrix.
    fn with_features(&self, features: Vec<Vec<f64>>) -> Dataset {
        Dataset {
            features,
            labels: self.labels.clone(),
            column_names: self.column_names.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

/// Reads a headered CSV file; `label_column` holds the class, every other
/// column must be numeric.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, label_column)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, label_column: &str) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_positions: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| *h == label_column)
        .map(|(i, _)| i)
        .collect();
    let label_pos = match label_positions.as_slice() {
        [] => return Err(DataError::MissingLabelColumn(label_column.to_string())),
        [p] => *p,
        _ => return Err(DataError::DuplicateLabelColumn(label_column.to_string())),
    };
    let column_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_pos)
        .map(|(_, h)| h.to_string())
        .collect();
    if column_names.is_empty() {
        return Err(DataError::NoFeatures);
    }

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(column_names.len());
        let mut col = 0;
        for (i, cell) in record.iter().enumerate() {
            if i == label_pos {
                raw_labels.push(cell.to_string());
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                line,
                column: column_names[col].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    line,
                    column: column_names[col].clone(),
                    value: cell.to_string(),
                });
            }
            row.push(value);
            col += 1;
        }
        features.push(row);
    }
    if features.len() < 2 {
        return Err(DataError::TooFewRows {
            needed: 2,
            found: features.len(),
        });
    }

    let class_names = sorted_class_names(&raw_labels);
    if class_names.len() < 2 {
        return Err(DataError::TooFewClasses(class_names.len()));
    }
    let labels = raw_labels
        .iter()
        .map(|l| class_names.iter().position(|c| c == l).expect("label collected above"))
        .collect();
    Dataset::new(features, labels, column_names, class_names)
}

/// Distinct labels, numerically ordered when every label is a number.
fn sorted_class_names(raw: &[String]) -> Vec<String> {
    let mut distinct: Vec<String> = raw.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        let mut paired: Vec<(f64, String)> = values.into_iter().zip(distinct).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        distinct = paired.into_iter().map(|(_, s)| s).collect();
    }
    distinct
}

/// Writes `ds` as CSV with the label in a trailing `label_column`.
/// Floats use the shortest round-trip representation.
pub fn write_csv<W: std::io::Write>(ds: &Dataset, writer: W, label_column: &str) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.column_names.iter().map(String::as_str).collect();
    header.push(label_column);
    wtr.write_record(&header)?;
    for (row, &label) in ds.features.iter().zip(&ds.labels) {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        record.push(ds.class_names[label].clone());
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// Per-column z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    means: Vec<f64>,
    std_devs: Vec<f64>,
    constant: Vec<bool>,
}

impl Standardizer {
    /// Population mean and standard deviation per column. Columns with
    /// (numerically) zero spread get divisor 1 and are flagged constant.
    pub fn fit(ds: &Dataset) -> Self {
        let d = ds.n_features();
        let n = ds.n_rows().max(1) as f64;
        let mut means = vec![0.0; d];
        for row in ds.features() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in ds.features() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std_devs = Vec::with_capacity(d);
        let mut constant = Vec::with_capacity(d);
        for (s, m) in var.iter().zip(&means) {
            let sd = (s / n).sqrt();
            let is_constant = sd <= 1e-12 * m.abs().max(1.0);
            constant.push(is_constant);
            std_devs.push(if is_constant { 1.0 } else { sd });
        }
        Self {
            means,
            std_devs,
            constant,
        }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Divisors actually applied (1 for constant columns).
    pub fn std_devs(&self) -> &[f64] {
        &self.std_devs
    }

    pub fn constant_columns(&self) -> &[bool] {
        &self.constant
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.std_devs))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.std_devs))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset, DataError> {
        if ds.n_features() != self.dim() {
            return Err(DataError::Dimension {
                expected: self.dim(),
                found: ds.n_features(),
            });
        }
        Ok(ds.with_features(ds.features().iter().map(|r| self.transform_row(r)).collect()))
    }
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    /// Split each class separately so both partitions keep class proportions.
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
            stratified: false,
        }
    }
}

/// Row indices of the train and test partitions, each in ascending order.
///
/// Unstratified: train size is `round(train_fraction * n)`. Stratified: the
/// same rounding is applied per class.
pub fn split_indices(labels: &[usize], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(DataError::BadFraction(f));
    }
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut train, mut test) = if spec.stratified {
        let classes: BTreeSet<usize> = labels.iter().copied().collect();
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in classes {
            let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            members.shuffle(&mut rng);
            let cut = (f * members.len() as f64).round() as usize;
            train.extend_from_slice(&members[..cut]);
            test.extend_from_slice(&members[cut..]);
        }
        (train, test)
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let cut = (f * n as f64).round() as usize;
        let test = order.split_off(cut);
        (order, test)
    };
    if train.is_empty() || test.is_empty() {
        return Err(DataError::EmptyPartition { n, fraction: f });
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn train_test_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), DataError> {
    if ds.n_rows() < 2 {
        return Err(DataError::TooFewRows {
            needed: 2,
            found: ds.n_rows(),
        });
    }
    let (train, test) = split_indices(ds.labels(), spec)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Binarizes `ds`: `positive_class` becomes label 1, every other class label 0.
/// The negative class is named `not-<positive>`.
pub fn one_vs_rest(ds: &Dataset, positive_class: &str) -> Result<Dataset, DataError> {
    let positive = ds
        .class_index(positive_class)
        .ok_or_else(|| DataError::UnknownClass(positive_class.to_string()))?;
    Ok(Dataset {
        features: ds.features.clone(),
        labels: ds.labels.iter().map(|&l| usize::from(l == positive)).collect(),
        column_names: ds.column_names.clone(),
        class_names: vec![format!("not-{positive_class}"), positive_class.to_string()],
    })
}

/// Mean of class "0" and class "1" in the artificial dataset.
pub const ARTIFICIAL_MEANS: [[f64; 2]; 2] = [[0.0, 0.0], [0.0, 1.0]];
/// Shared diagonal covariance entry.
pub const ARTIFICIAL_VARIANCE: f64 = 2.0;

/// Two heavily overlapping 2-D Gaussian classes: class "0" first, then
/// class "1", `n_per_class` rows each.
pub fn generate_artificial(n_per_class: usize, seed: u64) -> Result<Dataset, DataError> {
    if n_per_class == 0 {
        return Err(DataError::EmptyArtificial);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, ARTIFICIAL_VARIANCE.sqrt()).expect("positive std");
    let mut features = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (class, mean) in ARTIFICIAL_MEANS.iter().enumerate() {
        for _ in 0..n_per_class {
            features.push(vec![mean[0] + noise.sample(&mut rng), mean[1] + noise.sample(&mut rng)]);
            labels.push(class);
        }
    }
    Dataset::new(
        features,
        labels,
        vec!["x1".into(), "x2".into()],
        vec!["0".into(), "1".into()],
    )
}
