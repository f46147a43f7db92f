//! Bagged ensemble of [`DecisionTree`]s with per-split feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{DecisionTree, DecisionTreeParams};
use super::{check_binary, check_dim, BlackBoxModel, ModelError};
use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    /// Defaults to `floor(sqrt(d))`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            n_trees: 10,
            bootstrap: true,
            max_features: None,
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

impl RandomForest {
    pub fn fit(train: &Dataset, params: &RandomForestParams, seed: u64) -> Result<Self, ModelError> {
        check_binary(train)?;
        let n = train.n_rows();
        let d = train.n_features();
        let max_features = params
            .max_features
            .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1));
        let tree_params = DecisionTreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            max_features: Some(max_features),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..params.n_trees)
            .map(|_| {
                let indices: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut tree_rng = ChaCha8Rng::seed_from_u64(rng.random());
                DecisionTree::grow(train, indices, &tree_params, &mut tree_rng)
            })
            .collect();
        Ok(Self { trees, n_features: d })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    fn positive_fraction(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.positive_fraction(row)).sum::<f64>() / self.trees.len() as f64
    }
}

impl BlackBoxModel for RandomForest {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        check_dim(rows, self.n_features)?;
        Ok(rows.iter().map(|r| usize::from(self.positive_fraction(r) > 0.5)).collect())
    }

    fn predict_scores(&self, rows: &[Vec<f64>]) -> Option<Result<Vec<f64>, ModelError>> {
        Some(check_dim(rows, self.n_features).map(|_| rows.iter().map(|r| self.positive_fraction(r)).collect()))
    }

    fn descriptor(&self) -> String {
        "rf".into()
    }
}
