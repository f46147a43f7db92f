//! Explanation reports: the canonical JSON document and its SVG/HTML views.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explainer::{Explanation, Flag, LeafageConfig};

pub const SCHEMA_VERSION: u32 = 1;
/// JSON schema every serialized [`ExplanationReport`] satisfies.
pub const REPORT_SCHEMA: &str = include_str!("../schema/explanation_report.schema.json");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {0}")]
    Version(u32),
    #[error("invalid report: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportanceEntry {
    pub feature: String,
    /// The instance's value, original units.
    pub value: f64,
    /// `|w_i * z_i|` in standardized space.
    pub importance: f64,
    /// 1 is most important; ties keep column order.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleEntry {
    /// Training-row index.
    pub index: usize,
    pub features: IndexMap<String, f64>,
    pub dissimilarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub i_small: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationReport {
    pub schema_version: u32,
    pub dataset: String,
    pub model: String,
    pub instance: IndexMap<String, f64>,
    pub predicted_class: String,
    /// Always `"standardized"`.
    pub importance_units: String,
    /// In column order.
    pub importances: Vec<ImportanceEntry>,
    pub allies: Vec<ExampleEntry>,
    pub enemies: Vec<ExampleEntry>,
    pub flags: Vec<Flag>,
    pub seed: u64,
    pub config: ReportConfig,
}

/// Context an [`Explanation`] does not carry itself.
#[derive(Debug, Clone, Copy)]
pub struct ReportMeta<'a> {
    pub dataset: &'a str,
    pub model: &'a str,
    pub column_names: &'a [String],
    pub class_names: &'a [String],
    pub seed: u64,
    pub config: &'a LeafageConfig,
}

fn feature_map(names: &[String], values: &[f64]) -> IndexMap<String, f64> {
    names.iter().cloned().zip(values.iter().copied()).collect()
}

/// 1-based ranks by descending importance, ties by position.
pub fn importance_ranks(importances: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importances.len()).collect();
    order.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; importances.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

impl ExplanationReport {
    pub fn new(expl: &Explanation, meta: &ReportMeta<'_>) -> Self {
        let ranks = importance_ranks(&expl.importances);
        let importances = meta
            .column_names
            .iter()
            .enumerate()
            .map(|(i, name)| ImportanceEntry {
                feature: name.clone(),
                value: expl.test_instance[i],
                importance: expl.importances[i],
                rank: ranks[i],
            })
            .collect();
        let examples = |list: &[crate::explainer::Example]| {
            list.iter()
                .map(|e| ExampleEntry {
                    index: e.index,
                    features: feature_map(meta.column_names, &e.features),
                    dissimilarity: e.dissimilarity,
                })
                .collect()
        };
        Self {
            schema_version: SCHEMA_VERSION,
            dataset: meta.dataset.to_string(),
            model: meta.model.to_string(),
            instance: feature_map(meta.column_names, &expl.test_instance),
            predicted_class: meta.class_names[expl.predicted_class].clone(),
            importance_units: "standardized".to_string(),
            importances,
            allies: examples(&expl.allies),
            enemies: examples(&expl.enemies),
            flags: expl.flags.clone(),
            seed: meta.seed,
            config: ReportConfig {
                i_small: meta.config.i_small,
                k: meta.config.k_examples,
            },
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.flags.contains(&Flag::Degenerate)
    }

    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ReportError::Version(self.schema_version));
        }
        if self.importance_units != "standardized" {
            return Err(ReportError::Invalid(format!("importance_units {:?}", self.importance_units)));
        }
        let d = self.instance.len();
        if self.importances.len() != d {
            return Err(ReportError::Invalid(format!("{} importances for {d} features", self.importances.len())));
        }
        let mut seen = vec![false; d];
        for (entry, name) in self.importances.iter().zip(self.instance.keys()) {
            if &entry.feature != name {
                return Err(ReportError::Invalid(format!("importance for {:?} out of column order", entry.feature)));
            }
            if entry.rank == 0 || entry.rank > d || std::mem::replace(&mut seen[entry.rank - 1], true) {
                return Err(ReportError::Invalid("ranks are not a permutation of 1..d".into()));
            }
        }
        for e in self.allies.iter().chain(&self.enemies) {
            if e.features.len() != d || e.features.keys().zip(self.instance.keys()).any(|(a, b)| a != b) {
                return Err(ReportError::Invalid(format!("example {} has mismatched features", e.index)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let report: Self = serde_json::from_str(text)?;
        report.validate()?;
        Ok(report)
    }
}

const WIDTH: f64 = 960.0;
const ROW: f64 = 22.0;
const BAR_X: f64 = 170.0;
const BAR_MAX: f64 = 230.0;
const TABLE_X: f64 = 470.0;
const LABEL_COL: f64 = 110.0;
const CELL: f64 = 64.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" { "0.000".to_string() } else { s }
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, extra: &str, body: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}"{extra}>{}</text>"#,
        escape(body)
    );
}

/// Transposed table: one row per feature, first column the instance, then
/// one column per example. Returns the y below the table.
fn example_table(out: &mut String, report: &ExplanationReport, title: &str, examples: &[ExampleEntry], top: f64) -> f64 {
    text(out, TABLE_X, top, "start", r#" font-weight="bold""#, title);
    let header = top + ROW;
    text(out, TABLE_X + LABEL_COL + CELL / 2.0, header, "middle", r#" font-style="italic""#, "instance");
    for (j, e) in examples.iter().enumerate() {
        let x = TABLE_X + LABEL_COL + CELL * (j as f64 + 1.5);
        text(out, x, header, "middle", "", &format!("#{}", e.index));
    }
    let mut y = header;
    for (name, value) in &report.instance {
        y += ROW;
        text(out, TABLE_X, y, "start", "", name);
        text(out, TABLE_X + LABEL_COL + CELL / 2.0, y, "middle", r#" font-style="italic""#, &num(*value));
        for (j, e) in examples.iter().enumerate() {
            let x = TABLE_X + LABEL_COL + CELL * (j as f64 + 1.5);
            text(out, x, y, "middle", "", &num(e.features[name.as_str()]));
        }
    }
    y += ROW;
    text(out, TABLE_X, y, "start", r##" fill="#666""##, "dissimilarity");
    for (j, e) in examples.iter().enumerate() {
        let x = TABLE_X + LABEL_COL + CELL * (j as f64 + 1.5);
        text(out, x, y, "middle", r##" fill="#666""##, &num(e.dissimilarity));
    }
    if examples.is_empty() {
        y += ROW;
        text(out, TABLE_X, y, "start", r##" fill="#666""##, "(none)");
    }
    y + ROW * 1.5
}

/// Deterministic SVG view: relative importance bars on the left, ally and
/// enemy tables in original units on the right.
pub fn render_svg(report: &ExplanationReport) -> String {
    let d = report.importances.len();
    let n_cols = report.allies.len().max(report.enemies.len());
    let width = WIDTH.max(TABLE_X + LABEL_COL + CELL * (n_cols as f64 + 1.0) + 20.0);
    let table_height = 2.0 * (ROW * (d as f64 + 3.0) + ROW * 1.5 + ROW);
    let chart_height = ROW * (d as f64 + 2.0);
    let height = 70.0 + table_height.max(chart_height) + 20.0;

    let mut body = String::new();
    text(
        &mut body,
        20.0,
        28.0,
        "start",
        r#" font-size="16" font-weight="bold""#,
        &format!("Prediction: {}  ({} on {})", report.predicted_class, report.model, report.dataset),
    );

    let max = report.importances.iter().map(|e| e.importance).fold(0.0, f64::max);
    let show_bars = !report.is_degenerate() && max > 0.0;
    let mut top = 60.0;
    if !show_bars {
        let _ = writeln!(
            body,
            r##"<rect x="20" y="{:.1}" width="420" height="{ROW:.1}" fill="#fde2e1" stroke="#c0392b"/>"##,
            top - 15.0
        );
        text(
            &mut body,
            30.0,
            top,
            "start",
            r##" fill="#c0392b""##,
            "Degenerate surrogate: no feature importances",
        );
        top += ROW;
    }
    text(&mut body, 20.0, top, "start", r#" font-weight="bold""#, "Relative feature importance");
    if show_bars {
        let mut order: Vec<&ImportanceEntry> = report.importances.iter().collect();
        order.sort_by_key(|e| e.rank);
        for (i, e) in order.iter().enumerate() {
            let y = top + ROW * (i as f64 + 1.0);
            text(&mut body, BAR_X - 8.0, y, "end", "", &e.feature);
            let len = BAR_MAX * e.importance / max;
            let _ = writeln!(
                body,
                r##"<rect x="{BAR_X:.1}" y="{:.1}" width="{len:.1}" height="14" fill="#2e86c1"/>"##,
                y - 11.0
            );
            text(&mut body, BAR_X + len + 6.0, y, "start", r##" fill="#444""##, &num(e.importance));
        }
    }
    if !report.flags.is_empty() {
        let flags: Vec<&str> = report.flags.iter().map(|f| f.as_str()).collect();
        let y = top + ROW * (d as f64 + 2.0);
        text(&mut body, 20.0, y, "start", r##" fill="#c0392b""##, &format!("flags: {}", flags.join(", ")));
    }

    let y = example_table(&mut body, report, "Similar examples with the same prediction", &report.allies, 60.0);
    example_table(&mut body, report, "Similar examples with a different prediction", &report.enemies, y);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    out.push_str(&body);
    out.push_str("</svg>\n");
    out
}

/// Standalone HTML page wrapping [`render_svg`].
pub fn render_html(report: &ExplanationReport) -> String {
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Explanation: {}</title>\n</head>\n<body>\n{}</body>\n</html>\n",
        escape(&report.dataset),
        render_svg(report)
    )
}
