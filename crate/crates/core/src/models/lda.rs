//! Two-class linear discriminant analysis with a pooled, ridge-stabilized
//! covariance.

use nalgebra::{DMatrix, DVector};

use super::{check_binary, check_dim, BlackBoxModel, LinearModel, ModelError};
use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaParams {
    pub ridge: f64,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self { ridge: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct Lda {
    linear: LinearModel,
}

impl Lda {
    pub fn fit(train: &Dataset, params: &LdaParams) -> Result<Self, ModelError> {
        check_binary(train)?;
        let d = train.n_features();
        let mut means = [DVector::<f64>::zeros(d), DVector::<f64>::zeros(d)];
        let mut counts = [0usize; 2];
        for (row, &l) in train.features().iter().zip(train.labels()) {
            means[l] += DVector::from_column_slice(row);
            counts[l] += 1;
        }
        for c in 0..2 {
            means[c] /= counts[c] as f64;
        }
        let mut scatter = DMatrix::<f64>::zeros(d, d);
        for (row, &l) in train.features().iter().zip(train.labels()) {
            let centred = DVector::from_column_slice(row) - &means[l];
            scatter += &centred * centred.transpose();
        }
        let dof = (train.n_rows().saturating_sub(2)).max(1) as f64;
        let mut cov = scatter / dof;
        for i in 0..d {
            cov[(i, i)] += params.ridge;
        }
        let diff = &means[1] - &means[0];
        let w = match cov.clone().cholesky() {
            Some(chol) => chol.solve(&diff),
            None => cov.pseudo_inverse(1e-12).map_err(ModelError::Numerical)? * &diff,
        };
        let mid = (&means[0] + &means[1]) * 0.5;
        let prior = (counts[1] as f64 / counts[0] as f64).ln();
        let intercept = -w.dot(&mid) + prior;
        Ok(Self {
            linear: LinearModel {
                weights: w.iter().copied().collect(),
                intercept,
            },
        })
    }

    pub fn linear(&self) -> &LinearModel {
        &self.linear
    }
}

impl BlackBoxModel for Lda {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        check_dim(rows, self.linear.weights.len())?;
        Ok(rows.iter().map(|r| self.linear.label(r)).collect())
    }

    fn predict_scores(&self, rows: &[Vec<f64>]) -> Option<Result<Vec<f64>, ModelError>> {
        Some(check_dim(rows, self.linear.weights.len()).map(|_| rows.iter().map(|r| self.linear.score(r)).collect()))
    }

    fn descriptor(&self) -> String {
        "lda".into()
    }
}
