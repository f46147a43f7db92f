//! Brute-force k-nearest-neighbour classifier (Euclidean).

use super::{check_binary, check_dim, BlackBoxModel, ModelError};
use crate::data::Dataset;
use crate::linalg::squared_distance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct Knn {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    k: usize,
}

impl Knn {
    pub fn fit(train: &Dataset, params: &KnnParams) -> Result<Self, ModelError> {
        check_binary(train)?;
        Ok(Self {
            rows: train.features().to_vec(),
            labels: train.labels().to_vec(),
            k: params.k.min(train.n_rows()),
        })
    }

    /// Training indices of the `k` nearest rows; equal distances resolve to
    /// the lower index.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (squared_distance(r, row), i))
            .collect();
        let k = self.k;
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scored.truncate(k);
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.into_iter().map(|(_, i)| i).collect()
    }

    fn vote(&self, row: &[f64]) -> (usize, f64) {
        let near = self.neighbours(row);
        let positives = near.iter().filter(|&&i| self.labels[i] == 1).count();
        let fraction = positives as f64 / near.len() as f64;
        let label = match (2 * positives).cmp(&near.len()) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => self.labels[near[0]],
        };
        (label, fraction)
    }

    fn dim(&self) -> usize {
        self.rows[0].len()
    }
}

impl BlackBoxModel for Knn {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        check_dim(rows, self.dim())?;
        Ok(rows.iter().map(|r| self.vote(r).0).collect())
    }

    fn predict_scores(&self, rows: &[Vec<f64>]) -> Option<Result<Vec<f64>, ModelError>> {
        Some(check_dim(rows, self.dim()).map(|_| rows.iter().map(|r| self.vote(r).1).collect()))
    }

    fn descriptor(&self) -> String {
        format!("knn(k={})", self.k)
    }
}
