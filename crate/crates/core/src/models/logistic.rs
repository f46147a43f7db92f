//! L2-regularized logistic regression, solved by damped Newton iterations.
//!
//! The same solver backs the logistic-regression black box, the local
//! surrogate of the explainer and the kernel-weighted fit of the LIME
//! baseline.

use nalgebra::{DMatrix, DVector};

use super::{check_binary, check_dim, BlackBoxModel, LinearModel, ModelError};
use crate::data::Dataset;

/// Objective: `sum_i s_i * logloss_i + l2/2 * |w|^2` (intercept unpenalized).
#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: LinearModel,
    pub converged: bool,
    pub iterations: usize,
}

fn softplus(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

fn objective(rows: &[&[f64]], targets: &[f64], weights: Option<&[f64]>, l2: f64, theta: &DVector<f64>) -> f64 {
    let d = theta.len() - 1;
    let mut total = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let margin = margin(row, theta);
        let s = weights.map_or(1.0, |w| w[i]);
        total += s * (softplus(margin) - targets[i] * margin);
    }
    let w_sq: f64 = theta.rows(0, d).iter().map(|v| v * v).sum();
    total + 0.5 * l2 * w_sq
}

fn margin(row: &[f64], theta: &DVector<f64>) -> f64 {
    let d = row.len();
    row.iter().zip(theta.iter()).map(|(x, w)| x * w).sum::<f64>() + theta[d]
}

/// Fits `P(y = 1 | x) = sigmoid(w.x + b)`. `targets` are 0/1, `sample_weights`
/// non-negative. Converges when the largest gradient entry drops below
/// `tol * max(1, sum of weights)`.
pub fn fit_logistic(
    rows: &[&[f64]],
    targets: &[f64],
    sample_weights: Option<&[f64]>,
    opts: &LogisticOptions,
) -> LogisticFit {
    let d = rows.first().map_or(0, |r| r.len());
    let p = d + 1;
    let total_weight: f64 = sample_weights.map_or(rows.len() as f64, |w| w.iter().sum());
    let grad_tol = opts.tol * total_weight.max(1.0);
    let mut theta = DVector::<f64>::zeros(p);
    let mut current = objective(rows, targets, sample_weights, opts.l2, &theta);

    for iter in 0..opts.max_iter {
        let mut grad = DVector::<f64>::zeros(p);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for (i, row) in rows.iter().enumerate() {
            let s = sample_weights.map_or(1.0, |w| w[i]);
            if s == 0.0 {
                continue;
            }
            let prob = sigmoid(margin(row, &theta));
            let r = s * (prob - targets[i]);
            let curv = s * prob * (1.0 - prob);
            for a in 0..p {
                let xa = if a < d { row[a] } else { 1.0 };
                grad[a] += r * xa;
                for b in a..p {
                    let xb = if b < d { row[b] } else { 1.0 };
                    hess[(a, b)] += curv * xa * xb;
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        for a in 0..d {
            grad[a] += opts.l2 * theta[a];
            hess[(a, a)] += opts.l2;
        }
        if grad.amax() < grad_tol {
            return LogisticFit {
                model: to_linear(&theta),
                converged: true,
                iterations: iter,
            };
        }

        let step = newton_step(&hess, &grad);
        let slope = -grad.dot(&step);
        let objective_at = |candidate: &DVector<f64>| objective(rows, targets, sample_weights, opts.l2, candidate);
        let accepted = match backtrack(&theta, &step, current, slope, objective_at) {
            Some((next, value)) => {
                theta = next;
                current = value;
                true
            }
            None => false,
        };
        if !accepted {
            // No further decrease representable in floating point.
            return LogisticFit {
                model: to_linear(&theta),
                converged: grad.amax() < grad_tol.max(1e-6),
                iterations: iter,
            };
        }
    }
    LogisticFit {
        model: to_linear(&theta),
        converged: false,
        iterations: opts.max_iter,
    }
}

/// Backtracking (Armijo) search along `-step`; keeps the objective monotone
/// when the quadratic model overshoots on saturated probabilities. `None`
/// once no representable move decreases the objective.
fn backtrack(
    theta: &DVector<f64>,
    step: &DVector<f64>,
    current: f64,
    slope: f64,
    objective_at: impl Fn(&DVector<f64>) -> f64,
) -> Option<(DVector<f64>, f64)> {
    let mut t = 1.0;
    for _ in 0..60 {
        let candidate = theta - t * step;
        if &candidate == theta {
            return None;
        }
        let value = objective_at(&candidate);
        // Close to the optimum the decrease of a full Newton step falls
        // below the objective's rounding error; take the step anyway.
        let within_rounding = t == 1.0 && value - current <= 1e-12 * current.abs().max(1.0);
        if value <= current + 1e-4 * t * slope.min(0.0) || within_rounding {
            return Some((candidate, value));
        }
        t *= 0.5;
    }
    None
}

fn newton_step(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let p = grad.len();
    let mut damping = 0.0;
    let scale = hess.diagonal().amax().max(1e-12);
    loop {
        let mut h = hess.clone();
        for a in 0..p {
            h[(a, a)] += damping;
        }
        if let Some(chol) = h.cholesky() {
            return chol.solve(grad);
        }
        damping = if damping == 0.0 { 1e-10 * scale } else { damping * 10.0 };
        if damping > 1e6 * scale {
            return grad.clone();
        }
    }
}

fn to_linear(theta: &DVector<f64>) -> LinearModel {
    let d = theta.len() - 1;
    LinearModel {
        weights: theta.rows(0, d).iter().copied().collect(),
        intercept: theta[d],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1.0,
            max_iter: 1000,
            tol: 1e-6,
        }
    }
}

/// Logistic-regression black box.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    pub(crate) linear: LinearModel,
    pub(crate) converged: bool,
}

impl LogisticRegression {
    pub fn fit(train: &Dataset, params: &LogisticParams) -> Result<Self, ModelError> {
        check_binary(train)?;
        let rows: Vec<&[f64]> = train.features().iter().map(Vec::as_slice).collect();
        let targets: Vec<f64> = train.labels().iter().map(|&l| l as f64).collect();
        let fit = fit_logistic(
            &rows,
            &targets,
            None,
            &LogisticOptions {
                l2: params.l2,
                max_iter: params.max_iter,
                tol: params.tol,
            },
        );
        if !fit.converged {
            log::warn!("logistic regression did not converge in {} iterations", params.max_iter);
        }
        Ok(Self {
            linear: fit.model,
            converged: fit.converged,
        })
    }

    pub fn linear(&self) -> &LinearModel {
        &self.linear
    }

    pub fn converged(&self) -> bool {
        self.converged
    }
}

impl BlackBoxModel for LogisticRegression {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        check_dim(rows, self.linear.weights.len())?;
        Ok(rows.iter().map(|r| self.linear.label(r)).collect())
    }

    fn predict_scores(&self, rows: &[Vec<f64>]) -> Option<Result<Vec<f64>, ModelError>> {
        Some(check_dim(rows, self.linear.weights.len()).map(|_| rows.iter().map(|r| self.linear.score(r)).collect()))
    }

    fn descriptor(&self) -> String {
        "lr".into()
    }
}
