//! Local explanations from real training rows.
//!
//! For a test row `z` predicted as class `c_z` the explainer
//!
//! 1. finds the closest training row the black box labels differently
//!    (the closest enemy), which sits near the local decision boundary;
//! 2. takes the `i_small * d` training rows of each predicted class nearest
//!    to that enemy;
//! 3. fits a logistic-regression surrogate `w.x + c` on them, targets being
//!    the black box's predicted labels;
//! 4. scores feature importance as `|w_i * z_i|` and ranks training rows by
//!    the black-box dissimilarity `|w.t - w.z| * |t - z|`.
//!
//! All geometry happens in standardized feature space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Standardizer};
use crate::linalg::{argsort_by_key, dot, euclidean, norm, squared_distance};
use crate::models::{fit_logistic, BlackBoxModel, LogisticOptions, ModelError};

/// Ridge strength of every local surrogate fit.
pub const SURROGATE_L2: f64 = 1e-4;
const SURROGATE_MAX_ITER: usize = 500;
const SURROGATE_TOL: f64 = 1e-9;
/// Weight norms below this mark the surrogate degenerate.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("the black box predicts class {0} for every training row; no enemy to contrast with")]
    NoEnemies(usize),
    #[error("feature dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("local training set is empty")]
    EmptyLocalSet,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafageConfig {
    /// Multiplier on the per-class quota `i_small * d`; at least 2.
    pub i_small: usize,
    pub k_examples: usize,
    pub seed: u64,
}

impl Default for LeafageConfig {
    fn default() -> Self {
        Self {
            i_small: 10,
            k_examples: 5,
            seed: 0,
        }
    }
}

impl LeafageConfig {
    pub fn validate(&self) -> Result<(), ExplainError> {
        if self.i_small < 2 {
            return Err(ExplainError::Config(format!("i_small must be at least 2, got {}", self.i_small)));
        }
        if self.k_examples == 0 {
            return Err(ExplainError::Config("k_examples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Linear approximation `w.x + c` of the black box around one test row.
/// Positive scores point to label 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSurrogate {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Training index of the closest enemy, when the surrogate came from the
    /// closest-enemy neighbourhood.
    pub x_border: Option<usize>,
    pub local_indices: Vec<usize>,
    pub degenerate: bool,
}

impl LocalSurrogate {
    /// Zero weights and a fixed score; always degenerate.
    pub fn constant(dim: usize, score: f64) -> Self {
        Self {
            weights: vec![0.0; dim],
            intercept: score,
            x_border: None,
            local_indices: Vec::new(),
            degenerate: true,
        }
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.intercept
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), ExplainError> {
    if expected == found {
        Ok(())
    } else {
        Err(ExplainError::Dimension { expected, found })
    }
}

/// Index of the training row nearest to `z` among rows predicted differently
/// from `c_z`. Equal distances resolve to the lower index.
pub fn closest_enemy(rows: &[Vec<f64>], predicted: &[usize], z: &[f64], c_z: usize) -> Result<usize, ExplainError> {
    let mut best: Option<(f64, usize)> = None;
    for (i, (row, &label)) in rows.iter().zip(predicted).enumerate() {
        if label == c_z {
            continue;
        }
        check_len(z.len(), row.len())?;
        let dist = squared_distance(row, z);
        if best.is_none_or(|(b, _)| dist < b) {
            best = Some((dist, i));
        }
    }
    best.map(|(_, i)| i).ok_or(ExplainError::NoEnemies(c_z))
}

/// Rows around the closest enemy used to fit the surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTrainingSet {
    /// Per predicted label (index 0 and 1), nearest-first.
    pub by_class: [Vec<usize>; 2],
    pub quota: usize,
}

impl LocalTrainingSet {
    /// Label-0 rows followed by label-1 rows.
    pub fn indices(&self) -> Vec<usize> {
        self.by_class.iter().flatten().copied().collect()
    }

    /// True when some class supplied fewer rows than the quota.
    pub fn shortfall(&self) -> bool {
        self.by_class.iter().any(|c| c.len() < self.quota)
    }
}

/// For each predicted class, the `i_small * d` rows closest to
/// `rows[x_border]`, or all of them when the class is smaller.
pub fn sample_local_training_set(
    rows: &[Vec<f64>],
    predicted: &[usize],
    x_border: usize,
    cfg: &LeafageConfig,
) -> Result<LocalTrainingSet, ExplainError> {
    cfg.validate()?;
    let border = &rows[x_border];
    let quota = cfg.i_small * border.len();
    let distances: Vec<f64> = rows.iter().map(|r| squared_distance(r, border)).collect();
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for i in argsort_by_key(&distances) {
        let class = &mut by_class[predicted[i].min(1)];
        if class.len() < quota {
            class.push(i);
        }
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(ExplainError::NoEnemies(1 - empty));
    }
    Ok(LocalTrainingSet { by_class, quota })
}

/// Logistic-regression surrogate on `rows[local_indices]` with the black
/// box's labels as targets. A one-class subset or a vanishing weight vector
/// yields a degenerate surrogate with zero weights.
pub fn fit_local_linear(rows: &[Vec<f64>], predicted: &[usize], local_indices: &[usize]) -> Result<LocalSurrogate, ExplainError> {
    let first = local_indices.first().ok_or(ExplainError::EmptyLocalSet)?;
    let dim = rows[*first].len();
    let subset: Vec<&[f64]> = local_indices.iter().map(|&i| rows[i].as_slice()).collect();
    let targets: Vec<f64> = local_indices.iter().map(|&i| predicted[i] as f64).collect();
    let positives = targets.iter().filter(|&&t| t == 1.0).count();
    if positives == 0 || positives == targets.len() {
        return Ok(LocalSurrogate {
            local_indices: local_indices.to_vec(),
            ..LocalSurrogate::constant(dim, 0.0)
        });
    }
    let fit = fit_logistic(
        &subset,
        &targets,
        None,
        &LogisticOptions {
            l2: SURROGATE_L2,
            max_iter: SURROGATE_MAX_ITER,
            tol: SURROGATE_TOL,
        },
    );
    if !fit.converged {
        log::debug!("local surrogate stopped after {} iterations", fit.iterations);
    }
    let degenerate = norm(&fit.model.weights) < DEGENERATE_NORM;
    Ok(LocalSurrogate {
        weights: if degenerate { vec![0.0; dim] } else { fit.model.weights },
        intercept: if degenerate { 0.0 } else { fit.model.intercept },
        x_border: None,
        local_indices: local_indices.to_vec(),
        degenerate,
    })
}

/// Black-box dissimilarity `|w.t - w.z| * |t - z|`. A degenerate surrogate
/// falls back to the plain Euclidean distance.
pub fn dissimilarity(s: &LocalSurrogate, z: &[f64], t: &[f64]) -> Result<f64, ExplainError> {
    check_len(s.dim(), z.len())?;
    check_len(s.dim(), t.len())?;
    let spatial = euclidean(t, z);
    if s.degenerate {
        return Ok(spatial);
    }
    let projected: f64 = s.weights.iter().zip(t.iter().zip(z)).map(|(w, (a, b))| w * (a - b)).sum();
    Ok(projected.abs() * spatial)
}

/// `|w_i * z_i|` per feature, all zero for a degenerate surrogate.
pub fn feature_importances(s: &LocalSurrogate, z: &[f64]) -> Result<Vec<f64>, ExplainError> {
    check_len(s.dim(), z.len())?;
    if s.degenerate {
        return Ok(vec![0.0; z.len()]);
    }
    Ok(s.weights.iter().zip(z).map(|(w, v)| (w * v).abs()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbour {
    /// Training-row index.
    pub index: usize,
    pub dissimilarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedExamples {
    /// Same predicted class as `z`, most similar first.
    pub allies: Vec<Neighbour>,
    /// Opposite predicted class, most similar first.
    pub enemies: Vec<Neighbour>,
    pub ally_shortfall: bool,
    pub enemy_shortfall: bool,
}

/// The `k` training rows of each predicted class with the lowest
/// dissimilarity to `z`. Rows identical to `z` are not returned as allies.
pub fn retrieve_examples(
    rows: &[Vec<f64>],
    predicted: &[usize],
    s: &LocalSurrogate,
    z: &[f64],
    c_z: usize,
    k: usize,
) -> Result<RetrievedExamples, ExplainError> {
    let mut scores = Vec::with_capacity(rows.len());
    for row in rows {
        scores.push(dissimilarity(s, z, row)?);
    }
    let mut allies = Vec::new();
    let mut enemies = Vec::new();
    for i in argsort_by_key(&scores) {
        let entry = Neighbour {
            index: i,
            dissimilarity: scores[i],
        };
        if predicted[i] == c_z {
            if allies.len() < k && rows[i].as_slice() != z {
                allies.push(entry);
            }
        } else if enemies.len() < k {
            enemies.push(entry);
        }
        if allies.len() == k && enemies.len() == k {
            break;
        }
    }
    Ok(RetrievedExamples {
        ally_shortfall: allies.len() < k,
        enemy_shortfall: enemies.len() < k,
        allies,
        enemies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// One-class neighbourhood or vanishing weights; dissimilarity fell back
    /// to Euclidean distance and importances are zero.
    Degenerate,
    /// A class had fewer rows than `i_small * d` for the local fit.
    LocalSetShortfall,
    AllyShortfall,
    EnemyShortfall,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Degenerate => "degenerate",
            Flag::LocalSetShortfall => "local_set_shortfall",
            Flag::AllyShortfall => "ally_shortfall",
            Flag::EnemyShortfall => "enemy_shortfall",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub index: usize,
    /// Original units.
    pub features: Vec<f64>,
    pub dissimilarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// Original units.
    pub test_instance: Vec<f64>,
    pub predicted_class: usize,
    /// `|w_i * z_i|` in standardized space.
    pub importances: Vec<f64>,
    pub allies: Vec<Example>,
    pub enemies: Vec<Example>,
    pub surrogate: LocalSurrogate,
    pub flags: Vec<Flag>,
}

/// Explainer bound to one black box and one (standardized) training set.
/// The black box's training-set predictions are computed once.
pub struct Leafage<'a, M: BlackBoxModel + ?Sized> {
    model: &'a M,
    train: &'a Dataset,
    scaler: &'a Standardizer,
    predicted: Vec<usize>,
}

impl<'a, M: BlackBoxModel + ?Sized> Leafage<'a, M> {
    /// `train` must already be standardized by `scaler`.
    pub fn new(model: &'a M, train: &'a Dataset, scaler: &'a Standardizer) -> Result<Self, ExplainError> {
        check_len(train.n_features(), scaler.dim())?;
        let predicted = model.predict_labels(train.features())?;
        Ok(Self {
            model,
            train,
            scaler,
            predicted,
        })
    }

    /// Black-box labels of the training rows.
    pub fn predicted(&self) -> &[usize] {
        &self.predicted
    }

    pub fn train(&self) -> &Dataset {
        self.train
    }

    pub fn predict_one(&self, z: &[f64]) -> Result<usize, ExplainError> {
        check_len(self.train.n_features(), z.len())?;
        Ok(self.model.predict_labels(&[z.to_vec()])?[0])
    }

    /// Closest enemy, local training set and surrogate for standardized `z`
    /// predicted as `c_z`.
    pub fn surrogate(&self, z: &[f64], c_z: usize, cfg: &LeafageConfig) -> Result<(LocalSurrogate, LocalTrainingSet), ExplainError> {
        let rows = self.train.features();
        let border = closest_enemy(rows, &self.predicted, z, c_z)?;
        let local = sample_local_training_set(rows, &self.predicted, border, cfg)?;
        let mut surrogate = fit_local_linear(rows, &self.predicted, &local.indices())?;
        surrogate.x_border = Some(border);
        Ok((surrogate, local))
    }

    /// Full explanation of standardized row `z`.
    pub fn explain(&self, z: &[f64], cfg: &LeafageConfig) -> Result<Explanation, ExplainError> {
        cfg.validate()?;
        let c_z = self.predict_one(z)?;
        let (surrogate, local) = self.surrogate(z, c_z, cfg)?;
        let importances = feature_importances(&surrogate, z)?;
        let rows = self.train.features();
        let found = retrieve_examples(rows, &self.predicted, &surrogate, z, c_z, cfg.k_examples)?;

        let mut flags = Vec::new();
        if surrogate.degenerate {
            flags.push(Flag::Degenerate);
        }
        if local.shortfall() {
            flags.push(Flag::LocalSetShortfall);
        }
        if found.ally_shortfall {
            flags.push(Flag::AllyShortfall);
        }
        if found.enemy_shortfall {
            flags.push(Flag::EnemyShortfall);
        }
        let to_example = |n: &Neighbour| Example {
            index: n.index,
            features: self.scaler.inverse_row(&rows[n.index]),
            dissimilarity: n.dissimilarity,
        };
        Ok(Explanation {
            test_instance: self.scaler.inverse_row(z),
            predicted_class: c_z,
            importances,
            allies: found.allies.iter().map(to_example).collect(),
            enemies: found.enemies.iter().map(to_example).collect(),
            surrogate,
            flags,
        })
    }
}

/// One-shot [`Leafage::explain`].
pub fn explain<M: BlackBoxModel + ?Sized>(
    model: &M,
    train: &Dataset,
    scaler: &Standardizer,
    z: &[f64],
    cfg: &LeafageConfig,
) -> Result<Explanation, ExplainError> {
    Leafage::new(model, train, scaler)?.explain(z, cfg)
}
