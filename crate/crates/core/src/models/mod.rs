//! Black-box classifier interface and the in-repo reference classifiers.
//!
//! Every model speaks binary labels: `0` for the negative class and `1` for
//! the positive one.

mod external;
mod forest;
mod knn;
mod lda;
mod logistic;
mod svm;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::linalg::dot;

pub use external::ExternalModel;
pub use forest::{RandomForest, RandomForestParams};
pub use knn::{Knn, KnnParams};
pub use lda::{Lda, LdaParams};
pub use logistic::{fit_logistic, LogisticFit, LogisticOptions, LogisticParams, LogisticRegression};
pub use svm::{LinearSvm, LinearSvmParams};
pub use tree::{DecisionTree, DecisionTreeParams};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("training labels must be binary (0/1), found label {0}")]
    NonBinary(usize),
    #[error("training set is empty")]
    EmptyTraining,
    #[error("feature dimension mismatch: model expects {expected}, row has {found}")]
    Dimension { expected: usize, found: usize },
    #[error("unknown classifier `{0}` (expected one of lr, svm, lda, dt, rf, knn)")]
    UnknownKind(String),
    #[error("unknown hyperparameter `{key}` for {kind}")]
    UnknownHyperparam { kind: ClassifierKind, key: String },
    #[error("invalid hyperparameter `{key}` = {value}: {reason}")]
    InvalidHyperparam { key: String, value: f64, reason: &'static str },
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
    #[error("external model: {0}")]
    Protocol(String),
    #[error("external model timed out after {0} ms")]
    Timeout(u64),
    #[error("external model process exited")]
    ProcessExited,
    #[error("external model i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Opaque label-predicting model.
pub trait BlackBoxModel: Send + Sync {
    /// One 0/1 label per row, deterministic for a fixed model.
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError>;

    /// Real-valued score per row, higher meaning more positive, when the
    /// model has one.
    fn predict_scores(&self, _rows: &[Vec<f64>]) -> Option<Result<Vec<f64>, ModelError>> {
        None
    }

    fn descriptor(&self) -> String;
}

impl<M: BlackBoxModel + ?Sized> BlackBoxModel for &M {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        (**self).predict_labels(rows)
    }
    fn predict_scores(&self, rows: &[Vec<f64>]) -> Option<Result<Vec<f64>, ModelError>> {
        (**self).predict_scores(rows)
    }
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

impl<M: BlackBoxModel + ?Sized> BlackBoxModel for Box<M> {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        (**self).predict_labels(rows)
    }
    fn predict_scores(&self, rows: &[Vec<f64>]) -> Option<Result<Vec<f64>, ModelError>> {
        (**self).predict_scores(rows)
    }
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

/// Hyperplane `w.x + c`; positive side is label 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn score(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.intercept
    }

    pub fn label(&self, row: &[f64]) -> usize {
        usize::from(self.score(row) > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lr,
    Svm,
    Lda,
    Dt,
    Rf,
    Knn,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [Self::Lr, Self::Svm, Self::Lda, Self::Dt, Self::Rf, Self::Knn];

    pub fn name(self) -> &'static str {
        match self {
            Self::Lr => "lr",
            Self::Svm => "svm",
            Self::Lda => "lda",
            Self::Dt => "dt",
            Self::Rf => "rf",
            Self::Knn => "knn",
        }
    }

    /// LR, SVM and LDA have a single hyperplane as decision boundary.
    pub fn is_linear(self) -> bool {
        matches!(self, Self::Lr | Self::Svm | Self::Lda)
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownKind(s.to_string()))
    }
}

/// Numeric hyperparameter overrides, keyed by name.
pub type Hyperparams = BTreeMap<String, f64>;

/// A trained reference classifier.
#[derive(Debug, Clone)]
pub enum Classifier {
    Lr(LogisticRegression),
    Svm(LinearSvm),
    Lda(Lda),
    Dt(DecisionTree),
    Rf(RandomForest),
    Knn(Knn),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::Lr(_) => ClassifierKind::Lr,
            Self::Svm(_) => ClassifierKind::Svm,
            Self::Lda(_) => ClassifierKind::Lda,
            Self::Dt(_) => ClassifierKind::Dt,
            Self::Rf(_) => ClassifierKind::Rf,
            Self::Knn(_) => ClassifierKind::Knn,
        }
    }

    /// Hyperplane of the linear family, `None` otherwise.
    pub fn linear(&self) -> Option<&LinearModel> {
        match self {
            Self::Lr(m) => Some(m.linear()),
            Self::Svm(m) => Some(m.linear()),
            Self::Lda(m) => Some(m.linear()),
            _ => None,
        }
    }

    fn inner(&self) -> &dyn BlackBoxModel {
        match self {
            Self::Lr(m) => m,
            Self::Svm(m) => m,
            Self::Lda(m) => m,
            Self::Dt(m) => m,
            Self::Rf(m) => m,
            Self::Knn(m) => m,
        }
    }
}

impl BlackBoxModel for Classifier {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        self.inner().predict_labels(rows)
    }
    fn predict_scores(&self, rows: &[Vec<f64>]) -> Option<Result<Vec<f64>, ModelError>> {
        self.inner().predict_scores(rows)
    }
    fn descriptor(&self) -> String {
        self.inner().descriptor()
    }
}

/// Trains `kind` on a binary `train` set. Unset hyperparameters take the
/// defaults of each algorithm's params type.
pub fn fit(kind: ClassifierKind, train: &Dataset, hyperparams: &Hyperparams, seed: u64) -> Result<Classifier, ModelError> {
    let mut hp = HyperparamReader::new(kind, hyperparams);
    let model = match kind {
        ClassifierKind::Lr => {
            let d = LogisticParams::default();
            let params = LogisticParams {
                l2: hp.positive("l2", d.l2)?,
                max_iter: hp.count("max_iter", d.max_iter)?,
                tol: hp.positive("tol", d.tol)?,
            };
            hp.finish()?;
            Classifier::Lr(LogisticRegression::fit(train, &params)?)
        }
        ClassifierKind::Svm => {
            let d = LinearSvmParams::default();
            let params = LinearSvmParams {
                c: hp.positive("c", d.c)?,
                max_iter: hp.count("max_iter", d.max_iter)?,
            };
            hp.finish()?;
            Classifier::Svm(LinearSvm::fit(train, &params)?)
        }
        ClassifierKind::Lda => {
            let d = LdaParams::default();
            let params = LdaParams {
                ridge: hp.non_negative("ridge", d.ridge)?,
            };
            hp.finish()?;
            Classifier::Lda(Lda::fit(train, &params)?)
        }
        ClassifierKind::Dt => {
            let d = DecisionTreeParams::default();
            let params = DecisionTreeParams {
                max_depth: hp.optional_count("max_depth")?,
                min_samples_split: hp.count("min_samples_split", d.min_samples_split)?.max(2),
                max_features: hp.optional_count("max_features")?,
            };
            hp.finish()?;
            Classifier::Dt(DecisionTree::fit(train, &params, seed)?)
        }
        ClassifierKind::Rf => {
            let d = RandomForestParams::default();
            let params = RandomForestParams {
                n_trees: hp.count("n_trees", d.n_trees)?.max(1),
                bootstrap: hp.flag("bootstrap", d.bootstrap)?,
                max_features: hp.optional_count("max_features")?,
                max_depth: hp.optional_count("max_depth")?,
                min_samples_split: hp.count("min_samples_split", d.min_samples_split)?.max(2),
            };
            hp.finish()?;
            Classifier::Rf(RandomForest::fit(train, &params, seed)?)
        }
        ClassifierKind::Knn => {
            let d = KnnParams::default();
            let params = KnnParams {
                k: hp.count("k", d.k)?.max(1),
            };
            hp.finish()?;
            Classifier::Knn(Knn::fit(train, &params)?)
        }
    };
    Ok(model)
}

struct HyperparamReader<'a> {
    kind: ClassifierKind,
    map: &'a Hyperparams,
    used: Vec<&'static str>,
}

impl<'a> HyperparamReader<'a> {
    fn new(kind: ClassifierKind, map: &'a Hyperparams) -> Self {
        Self {
            kind,
            map,
            used: Vec::new(),
        }
    }

    fn get(&mut self, key: &'static str) -> Option<f64> {
        self.used.push(key);
        self.map.get(key).copied()
    }

    fn positive(&mut self, key: &'static str, default: f64) -> Result<f64, ModelError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) if v > 0.0 && v.is_finite() => Ok(v),
            Some(v) => Err(ModelError::InvalidHyperparam {
                key: key.into(),
                value: v,
                reason: "must be positive",
            }),
        }
    }

    fn non_negative(&mut self, key: &'static str, default: f64) -> Result<f64, ModelError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) if v >= 0.0 && v.is_finite() => Ok(v),
            Some(v) => Err(ModelError::InvalidHyperparam {
                key: key.into(),
                value: v,
                reason: "must be non-negative",
            }),
        }
    }

    fn count(&mut self, key: &'static str, default: usize) -> Result<usize, ModelError> {
        Ok(self.optional_count(key)?.unwrap_or(default))
    }

    fn optional_count(&mut self, key: &'static str) -> Result<Option<usize>, ModelError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) if v >= 1.0 && v.fract() == 0.0 => Ok(Some(v as usize)),
            Some(v) => Err(ModelError::InvalidHyperparam {
                key: key.into(),
                value: v,
                reason: "must be a positive integer",
            }),
        }
    }

    fn flag(&mut self, key: &'static str, default: bool) -> Result<bool, ModelError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) if v == 0.0 || v == 1.0 => Ok(v == 1.0),
            Some(v) => Err(ModelError::InvalidHyperparam {
                key: key.into(),
                value: v,
                reason: "must be 0 or 1",
            }),
        }
    }

    fn finish(self) -> Result<(), ModelError> {
        match self.map.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(key) => Err(ModelError::UnknownHyperparam {
                kind: self.kind,
                key: key.clone(),
            }),
            None => Ok(()),
        }
    }
}

pub(crate) fn check_binary(train: &Dataset) -> Result<(), ModelError> {
    if train.n_rows() == 0 {
        return Err(ModelError::EmptyTraining);
    }
    if let Some(&bad) = train.labels().iter().find(|&&l| l > 1) {
        return Err(ModelError::NonBinary(bad));
    }
    let positives = train.labels().iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == train.n_rows() {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

pub(crate) fn check_dim(rows: &[Vec<f64>], expected: usize) -> Result<(), ModelError> {
    match rows.iter().find(|r| r.len() != expected) {
        Some(r) => Err(ModelError::Dimension {
            expected,
            found: r.len(),
        }),
        None => Ok(()),
    }
}
