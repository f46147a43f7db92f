//! Per-setting result rows with significance-based bolding.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::setting::{FidelitySummary, SettingKey, Strategy};
use super::wilcoxon::{wilcoxon_signed_rank, WilcoxonOutcome};
use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub setting: SettingKey,
    pub strategy: Strategy,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub n_scored: usize,
    pub n_skipped: usize,
    /// Best strategy of its setting, or not significantly worse than it.
    pub bold: bool,
    /// Against the best strategy; `None` for the best itself.
    pub comparison: Option<WilcoxonOutcome>,
}

impl TableRow {
    /// `mean (std)` as percentages with one decimal, `-` when unscored.
    pub fn cell(&self) -> String {
        match (self.mean, self.stddev) {
            (Some(m), Some(s)) => format!("{:.1} ({:.1})", 100.0 * m, 100.0 * s),
            _ => "-".to_string(),
        }
    }
}

/// Marks, within each setting, the strategy with the highest mean AUC and every
/// strategy a paired two-sided signed-rank test cannot separate from it at
/// `alpha / (m - 1)`. Pairs use instances scored by both strategies.
pub fn results_table(summaries: &[FidelitySummary], alpha: f64) -> Result<Vec<TableRow>, EvalError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EvalError::InvalidAlpha(alpha));
    }
    let mut groups: BTreeMap<&SettingKey, Vec<&FidelitySummary>> = BTreeMap::new();
    for s in summaries {
        groups.entry(&s.setting).or_default().push(s);
    }
    let mut rows = Vec::with_capacity(summaries.len());
    for (_, group) in groups {
        let best = group
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.mean.map(|m| (i, m)))
            .fold(None::<(usize, f64)>, |acc, (i, m)| match acc {
                Some((_, bm)) if bm >= m => acc,
                _ => Some((i, m)),
            })
            .map(|(i, _)| i);
        let corrected = alpha / (group.len().saturating_sub(1).max(1)) as f64;
        for (i, s) in group.iter().enumerate() {
            let (bold, comparison) = match best {
                None => (false, None),
                Some(b) if b == i => (true, None),
                Some(b) => {
                    if s.mean.is_none() {
                        (false, None)
                    } else {
                        let (x, y) = paired_scores(group[b], s)?;
                        let outcome = wilcoxon_signed_rank(&x, &y)?;
                        let bold = outcome.p_value().is_none_or(|p| p >= corrected);
                        (bold, Some(outcome))
                    }
                }
            };
            rows.push(TableRow {
                setting: s.setting.clone(),
                strategy: s.strategy,
                mean: s.mean,
                stddev: s.stddev,
                n_scored: s.n_scored,
                n_skipped: s.n_skipped,
                bold,
                comparison,
            });
        }
    }
    Ok(rows)
}

fn paired_scores(a: &FidelitySummary, b: &FidelitySummary) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    if a.per_instance.len() != b.per_instance.len() {
        return Err(EvalError::LengthMismatch(a.per_instance.len(), b.per_instance.len()));
    }
    Ok(a.per_instance
        .iter()
        .zip(&b.per_instance)
        .filter_map(|(x, y)| Some((*x.as_ref().ok()?, *y.as_ref().ok()?)))
        .unzip())
}

#[derive(Serialize)]
struct CsvRow<'a> {
    setting: String,
    strategy: &'a str,
    mean_auc: Option<f64>,
    std_auc: Option<f64>,
    n: usize,
    n_skipped: usize,
    bold: bool,
}

pub fn write_table_csv<W: Write>(rows: &[TableRow], writer: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(CsvRow {
            setting: r.setting.to_string(),
            strategy: r.strategy.name(),
            mean_auc: r.mean,
            std_auc: r.stddev,
            n: r.n_scored,
            n_skipped: r.n_skipped,
            bold: r.bold,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
