//! Simplified tabular LIME: Gaussian samples in standardized space, labelled
//! by the black box and fitted with an exponential-kernel weighted logistic
//! regression.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::explainer::{ExplainError, LocalSurrogate, DEGENERATE_NORM, SURROGATE_L2};
use crate::linalg::{norm, squared_distance};
use crate::models::{fit_logistic, BlackBoxModel, LogisticOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Kernel width; `None` means `0.75 * sqrt(d)`.
    pub sigma: Option<f64>,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            sigma: None,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn sigma_for(&self, dim: usize) -> f64 {
        self.sigma.unwrap_or_else(|| default_sigma(dim))
    }

    pub fn validate(&self, dim: usize) -> Result<(), ExplainError> {
        if self.n_samples < 10 * dim {
            return Err(ExplainError::Config(format!(
                "LIME needs at least {} samples for {dim} features, got {}",
                10 * dim,
                self.n_samples
            )));
        }
        let sigma = self.sigma_for(dim);
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ExplainError::Config(format!("kernel width must be positive, got {sigma}")));
        }
        Ok(())
    }
}

pub fn default_sigma(dim: usize) -> f64 {
    0.75 * (dim as f64).sqrt()
}

/// `n_samples` rows of i.i.d. standard-normal features.
pub fn lime_sample(dim: usize, cfg: &LimeConfig) -> Result<Vec<Vec<f64>>, ExplainError> {
    cfg.validate(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.n_samples)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect())
}

/// `exp(-|x - z|^2 / sigma^2)`.
pub fn kernel_weight(z: &[f64], x: &[f64], sigma: f64) -> f64 {
    (-squared_distance(x, z) / (sigma * sigma)).exp()
}

/// Kernel-weighted logistic surrogate around standardized `z`. A black box
/// that labels every sample alike gives a degenerate surrogate.
pub fn lime_fit<M: BlackBoxModel + ?Sized>(model: &M, z: &[f64], cfg: &LimeConfig) -> Result<LocalSurrogate, ExplainError> {
    let dim = z.len();
    let samples = lime_sample(dim, cfg)?;
    let labels = model.predict_labels(&samples)?;
    let sigma = cfg.sigma_for(dim);
    let weights: Vec<f64> = samples.iter().map(|x| kernel_weight(z, x, sigma)).collect();
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Ok(LocalSurrogate::constant(dim, 0.0));
    }
    let rows: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
    let targets: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let fit = fit_logistic(
        &rows,
        &targets,
        Some(&weights),
        &LogisticOptions {
            l2: SURROGATE_L2,
            max_iter: 500,
            tol: 1e-9,
        },
    );
    if !fit.converged {
        log::debug!("lime surrogate stopped after {} iterations without converging", fit.iterations);
    }
    if norm(&fit.model.weights) < DEGENERATE_NORM {
        return Ok(LocalSurrogate::constant(dim, 0.0));
    }
    Ok(LocalSurrogate {
        weights: fit.model.weights,
        intercept: fit.model.intercept,
        x_border: None,
        local_indices: Vec::new(),
        degenerate: false,
    })
}
