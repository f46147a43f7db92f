//! CART-style binary classification tree with Gini impurity.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_binary, check_dim, BlackBoxModel, ModelError};
use crate::data::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionTreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
}

impl Default for DecisionTreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        positive_fraction: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl DecisionTree {
    pub fn fit(train: &Dataset, params: &DecisionTreeParams, seed: u64) -> Result<Self, ModelError> {
        check_binary(train)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let indices: Vec<usize> = (0..train.n_rows()).collect();
        Ok(Self::grow(train, indices, params, &mut rng))
    }

    /// Grows a tree on `indices` (repeats allowed, as in a bootstrap sample).
    /// The RNG is consulted only when `max_features` is below the dimension.
    pub(crate) fn grow(train: &Dataset, indices: Vec<usize>, params: &DecisionTreeParams, rng: &mut ChaCha8Rng) -> Self {
        let mut builder = Builder {
            rows: train.features(),
            labels: train.labels(),
            params,
            rng,
            nodes: Vec::new(),
        };
        builder.build(indices, 0);
        Self {
            nodes: builder.nodes,
            n_features: train.n_features(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn positive_fraction(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { positive_fraction } => return *positive_fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

struct Builder<'a, 'r> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    params: &'a DecisionTreeParams,
    rng: &'r mut ChaCha8Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    cost: f64,
}

/// `n * gini` for a node holding `pos` positives out of `n`.
fn weighted_gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let neg = n - pos;
    n - (pos * pos + neg * neg) / n
}

impl Builder<'_, '_> {
    fn build(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = indices.len();
        let positives = indices.iter().filter(|&&i| self.labels[i] == 1).count();
        self.nodes.push(Node::Leaf {
            positive_fraction: positives as f64 / n as f64,
        });
        let pure = positives == 0 || positives == n;
        let depth_capped = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || n < self.params.min_samples_split || depth_capped {
            return id;
        }
        let Some(split) = self.find_split(&indices, positives) else {
            return id;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.rows[i][split.feature] <= split.threshold);
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> (Vec<usize>, usize) {
        let d = self.rows[0].len();
        let mut order: Vec<usize> = (0..d).collect();
        match self.params.max_features {
            Some(k) if k < d => {
                order.shuffle(self.rng);
                (order, k.max(1))
            }
            _ => (order, d),
        }
    }

    fn find_split(&mut self, indices: &[usize], positives: usize) -> Option<BestSplit> {
        let (order, quota) = self.candidate_features();
        let mut best: Option<BestSplit> = None;
        for (visited, &feature) in order.iter().enumerate() {
            // Past the quota, keep looking only until some valid split exists.
            if visited >= quota && best.is_some() {
                break;
            }
            if let Some(candidate) = self.best_split_on(feature, indices, positives) {
                if best.as_ref().is_none_or(|b| candidate.cost < b.cost) {
                    best = Some(candidate);
                }
            }
        }
        best
    }

    fn best_split_on(&self, feature: usize, indices: &[usize], positives: usize) -> Option<BestSplit> {
        let mut sorted: Vec<usize> = indices.to_vec();
        sorted.sort_by(|&a, &b| self.rows[a][feature].total_cmp(&self.rows[b][feature]).then(a.cmp(&b)));
        let n = sorted.len() as f64;
        let total_pos = positives as f64;
        let mut left_n = 0.0;
        let mut left_pos = 0.0;
        let mut best: Option<BestSplit> = None;
        for w in 0..sorted.len() - 1 {
            let i = sorted[w];
            left_n += 1.0;
            left_pos += (self.labels[i] == 1) as u8 as f64;
            let here = self.rows[i][feature];
            let next = self.rows[sorted[w + 1]][feature];
            if here >= next {
                continue;
            }
            let cost = weighted_gini(left_pos, left_n) + weighted_gini(total_pos - left_pos, n - left_n);
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                let mut threshold = 0.5 * (here + next);
                if threshold >= next {
                    threshold = here;
                }
                best = Some(BestSplit {
                    feature,
                    threshold,
                    cost,
                });
            }
        }
        best
    }
}

impl BlackBoxModel for DecisionTree {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        check_dim(rows, self.n_features)?;
        Ok(rows.iter().map(|r| usize::from(self.positive_fraction(r) > 0.5)).collect())
    }

    fn predict_scores(&self, rows: &[Vec<f64>]) -> Option<Result<Vec<f64>, ModelError>> {
        Some(check_dim(rows, self.n_features).map(|_| rows.iter().map(|r| self.positive_fraction(r)).collect()))
    }

    fn descriptor(&self) -> String {
        "dt".into()
    }
}
