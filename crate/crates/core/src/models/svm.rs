//! Linear soft-margin SVM trained by full-batch primal subgradient descent
//! (Pegasos step schedule, best iterate kept).

use super::{check_binary, check_dim, BlackBoxModel, LinearModel, ModelError};
use crate::data::Dataset;
use crate::linalg::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSvmParams {
    pub c: f64,
    pub max_iter: usize,
}

impl Default for LinearSvmParams {
    fn default() -> Self {
        Self { c: 1.0, max_iter: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct LinearSvm {
    linear: LinearModel,
    objective: f64,
}

/// `0.5 |w|^2 + C * sum_i max(0, 1 - y_i (w.x_i + b))`, y in {-1, +1}.
fn primal_objective(rows: &[Vec<f64>], signs: &[f64], c: f64, w: &[f64], b: f64) -> f64 {
    let hinge: f64 = rows
        .iter()
        .zip(signs)
        .map(|(x, y)| (1.0 - y * (dot(w, x) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

impl LinearSvm {
    pub fn fit(train: &Dataset, params: &LinearSvmParams) -> Result<Self, ModelError> {
        check_binary(train)?;
        let rows = train.features();
        let n = rows.len() as f64;
        let d = train.n_features();
        let signs: Vec<f64> = train.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let lambda = 1.0 / (params.c * n);
        let radius = 1.0 / lambda.sqrt();

        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut best = (primal_objective(rows, &signs, params.c, &w, b), w.clone(), b);
        let mut grad_w = vec![0.0; d];
        for t in 1..=params.max_iter {
            let eta = 1.0 / (lambda * t as f64);
            grad_w.iter_mut().zip(&w).for_each(|(g, wi)| *g = lambda * wi);
            let mut grad_b = 0.0;
            for (x, y) in rows.iter().zip(&signs) {
                if y * (dot(&w, x) + b) < 1.0 {
                    for (g, xi) in grad_w.iter_mut().zip(x) {
                        *g -= y * xi / n;
                    }
                    grad_b -= y / n;
                }
            }
            w.iter_mut().zip(&grad_w).for_each(|(wi, g)| *wi -= eta * g);
            b -= eta * grad_b;
            let len = norm(&w);
            if len > radius {
                w.iter_mut().for_each(|wi| *wi *= radius / len);
            }
            let obj = primal_objective(rows, &signs, params.c, &w, b);
            if obj < best.0 {
                best = (obj, w.clone(), b);
            }
        }
        Ok(Self {
            linear: LinearModel {
                weights: best.1,
                intercept: best.2,
            },
            objective: best.0,
        })
    }

    pub fn linear(&self) -> &LinearModel {
        &self.linear
    }

    /// Primal objective at the returned iterate.
    pub fn objective(&self) -> f64 {
        self.objective
    }
}

impl BlackBoxModel for LinearSvm {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        check_dim(rows, self.linear.weights.len())?;
        Ok(rows.iter().map(|r| self.linear.label(r)).collect())
    }

    fn predict_scores(&self, rows: &[Vec<f64>]) -> Option<Result<Vec<f64>, ModelError>> {
        Some(check_dim(rows, self.linear.weights.len()).map(|_| rows.iter().map(|r| self.linear.score(r)).collect()))
    }

    fn descriptor(&self) -> String {
        "svm".into()
    }
}
