//! Local-fidelity runs over one (binary dataset, classifier) setting.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auc::auc;
use super::sphere::{fidelity_sphere, Skip, SphereRule};
use super::EvalError;
use crate::data::{Dataset, Standardizer};
use crate::explainer::{ExplainError, LeafageConfig, Leafage, LocalSurrogate};
use crate::lime::{lime_fit, LimeConfig};
use crate::models::{fit, BlackBoxModel, ClassifierKind, Hyperparams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Leafage,
    Lime,
    Baseline,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Leafage => "leafage",
            Self::Lime => "lime",
            Self::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Leafage, Self::Lime, Self::Baseline]
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EvalError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SettingKey {
    pub dataset: String,
    pub positive_class: String,
    pub classifier: String,
}

impl fmt::Display for SettingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.dataset, self.positive_class, self.classifier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityConfig {
    /// Enemy fraction that sets each sphere's radius, in (0, 1).
    pub p: f64,
    pub rule: SphereRule,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        Self {
            p: 0.95,
            rule: SphereRule::EnemyQuantile,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvaluationConfig {
    pub hyperparams: Hyperparams,
    /// Seeds classifier training; LIME sampling derives per-instance seeds
    /// from `lime.seed`.
    pub classifier_seed: u64,
    pub leafage: LeafageConfig,
    pub lime: LimeConfig,
    pub fidelity: FidelityConfig,
}

pub type InstanceScore = Result<f64, Skip>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelitySummary {
    pub setting: SettingKey,
    pub strategy: Strategy,
    /// One entry per test instance, in test-set order.
    pub per_instance: Vec<InstanceScore>,
    /// Over scored instances only; `None` when every instance was skipped.
    pub mean: Option<f64>,
    /// Population standard deviation over scored instances.
    pub stddev: Option<f64>,
    pub n_scored: usize,
    pub n_skipped: usize,
}

impl FidelitySummary {
    pub fn new(setting: SettingKey, strategy: Strategy, per_instance: Vec<InstanceScore>) -> Self {
        let scored: Vec<f64> = per_instance.iter().filter_map(|s| s.as_ref().ok().copied()).collect();
        let n = scored.len();
        let (mean, stddev) = if n == 0 {
            (None, None)
        } else {
            let mean = scored.iter().sum::<f64>() / n as f64;
            let var = scored.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            (Some(mean), Some(var.sqrt()))
        };
        Self {
            setting,
            strategy,
            n_skipped: per_instance.len() - n,
            n_scored: n,
            per_instance,
            mean,
            stddev,
        }
    }
}

/// AUC of surrogate scores against black-box labels on the sphere rows;
/// `None` when those labels are all alike.
pub fn local_fidelity(surrogate: &LocalSurrogate, labels: &[usize], rows: &[Vec<f64>]) -> Option<f64> {
    let scores: Vec<f64> = rows.iter().map(|r| surrogate.score(r)).collect();
    auc(labels, &scores).ok()
}

fn instance_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Standardizes on `train`, trains `classifier` and scores every strategy on
/// every test instance.
pub fn run_setting(
    setting: &SettingKey,
    train: &Dataset,
    test: &Dataset,
    classifier: ClassifierKind,
    strategies: &[Strategy],
    cfg: &EvaluationConfig,
) -> Result<Vec<FidelitySummary>, EvalError> {
    let scaler = Standardizer::fit(train);
    let train_std = scaler.transform(train)?;
    let test_std = scaler.transform(test)?;
    let model = fit(classifier, &train_std, &cfg.hyperparams, cfg.classifier_seed)?;
    evaluate_model(setting, &model, &train_std, &test_std, &scaler, strategies, cfg)
}

/// Fidelity of each strategy against an already trained black box; both sets
/// must be standardized by `scaler`.
pub fn evaluate_model<M: BlackBoxModel + ?Sized>(
    setting: &SettingKey,
    model: &M,
    train_std: &Dataset,
    test_std: &Dataset,
    scaler: &Standardizer,
    strategies: &[Strategy],
    cfg: &EvaluationConfig,
) -> Result<Vec<FidelitySummary>, EvalError> {
    let p = cfg.fidelity.p;
    if !(p > 0.0 && p < 1.0) {
        return Err(EvalError::InvalidP(p));
    }
    cfg.leafage.validate()?;
    if strategies.contains(&Strategy::Lime) {
        cfg.lime.validate(test_std.n_features())?;
    }
    let test_rows = test_std.features();
    let predicted_test = model.predict_labels(test_rows)?;
    let explainer = if strategies.contains(&Strategy::Leafage) {
        Some(Leafage::new(model, train_std, scaler)?)
    } else {
        None
    };

    let per_instance: Vec<Vec<InstanceScore>> = (0..test_rows.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<InstanceScore>, EvalError> {
            let sphere = match fidelity_sphere(test_rows, &predicted_test, i, p, cfg.fidelity.rule) {
                Ok(s) => s,
                Err(skip) => return Ok(vec![Err(skip); strategies.len()]),
            };
            let labels: Vec<usize> = sphere.indices.iter().map(|&j| predicted_test[j]).collect();
            let rows: Vec<Vec<f64>> = sphere.indices.iter().map(|&j| test_rows[j].clone()).collect();
            let z = &test_rows[i];
            let c_z = predicted_test[i];
            strategies
                .iter()
                .map(|strategy| {
                    let surrogate = match strategy {
                        Strategy::Leafage => {
                            let explainer = explainer.as_ref().expect("built when requested");
                            match explainer.surrogate(z, c_z, &cfg.leafage) {
                                Ok((s, _)) => s,
                                Err(ExplainError::NoEnemies(_)) => return Ok(Err(Skip::NoSurrogate)),
                                Err(e) => return Err(e.into()),
                            }
                        }
                        Strategy::Lime => {
                            let lime_cfg = LimeConfig {
                                seed: instance_seed(cfg.lime.seed, i),
                                ..cfg.lime
                            };
                            lime_fit(model, z, &lime_cfg)?
                        }
                        Strategy::Baseline => LocalSurrogate::constant(z.len(), c_z as f64),
                    };
                    Ok(local_fidelity(&surrogate, &labels, &rows).ok_or(Skip::SingleClass))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    Ok(strategies
        .iter()
        .enumerate()
        .map(|(k, &strategy)| {
            let scores = per_instance.iter().map(|row| row[k]).collect();
            FidelitySummary::new(setting.clone(), strategy, scores)
        })
        .collect())
}
