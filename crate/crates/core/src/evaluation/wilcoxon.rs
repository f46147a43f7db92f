//! Two-sided Wilcoxon signed-rank test for paired samples.
//!
//! Zero differences are dropped and tied magnitudes share midranks. Small
//! samples use the exact permutation distribution of the positive rank sum
//! (conditional on the observed ranks); large ones use the tie-corrected
//! normal approximation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;

/// Fewer non-zero differences than this gives [`WilcoxonOutcome::Inconclusive`].
pub const MIN_NONZERO: usize = 6;
/// Largest sample handled exactly under [`PValueMethod::Auto`].
pub const EXACT_MAX_N: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    /// Exact up to [`EXACT_MAX_N`] non-zero differences, normal beyond.
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WilcoxonOutcome {
    Inconclusive { n_nonzero: usize },
    Tested(WilcoxonResult),
}

impl WilcoxonOutcome {
    pub fn p_value(&self) -> Option<f64> {
        match self {
            Self::Tested(r) => Some(r.p_value),
            Self::Inconclusive { .. } => None,
        }
    }
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonOutcome, EvalError> {
    wilcoxon_signed_rank_with(a, b, PValueMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], method: PValueMethod) -> Result<WilcoxonOutcome, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n < MIN_NONZERO {
        return Ok(WilcoxonOutcome::Inconclusive { n_nonzero: n });
    }
    let (doubled_ranks, tie_sizes) = doubled_midranks(&diffs);
    let total2: u64 = doubled_ranks.iter().sum();
    let plus2: u64 = diffs.iter().zip(&doubled_ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let low2 = plus2.min(total2 - plus2);
    let statistic = low2 as f64 / 2.0;

    let exact = match method {
        PValueMethod::Exact => true,
        PValueMethod::Normal => false,
        PValueMethod::Auto => n <= EXACT_MAX_N,
    };
    let p_value = if exact {
        let dist = rank_sum_distribution(&doubled_ranks);
        let tail: f64 = dist[..=low2 as usize].iter().sum();
        (2.0 * tail).min(1.0)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        if var <= 0.0 {
            1.0
        } else {
            let z = (statistic - mean) / var.sqrt();
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            (2.0 * normal.cdf(-z.abs())).min(1.0)
        }
    };
    Ok(WilcoxonOutcome::Tested(WilcoxonResult {
        statistic,
        p_value,
        n,
        exact,
    }))
}

/// Twice the midrank of each `|d|` (so ties stay integral) and the sizes of
/// tied groups.
fn doubled_midranks(diffs: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks = vec![0u64; diffs.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && diffs[order[end]].abs() == diffs[order[start]].abs() {
            end += 1;
        }
        // 1-based ranks start+1..=end; doubled midrank is their sum / count * 2.
        let doubled = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        ties.push((end - start) as u64);
        start = end;
    }
    (ranks, ties)
}

/// Null probabilities of every attainable doubled positive-rank sum when each
/// rank's sign is an independent fair coin.
fn rank_sum_distribution(doubled_ranks: &[u64]) -> Vec<f64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut dist = vec![0.0; total as usize + 1];
    dist[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let mass = dist[s] * 0.5;
            dist[s] = mass;
            dist[s + r] += mass;
        }
        reach += r;
    }
    dist
}
