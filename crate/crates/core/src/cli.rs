//! Command-line front end: `gen-ad`, `explain`, `evaluate` and `render`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use indexmap::IndexMap;
use thiserror::Error;

use crate::data::{self, DataError, Dataset, SplitSpec, Standardizer};
use crate::evaluation::{
    results_table, run_setting, write_table_csv, EvalError, EvaluationConfig, FidelityConfig, SettingKey, SphereRule,
    Strategy, TableRow,
};
use crate::explainer::{ExplainError, LeafageConfig, Leafage};
use crate::lime::LimeConfig;
use crate::models::{fit, BlackBoxModel, ClassifierKind, ExternalModel, Hyperparams, ModelError};
use crate::report::{render_html, render_svg, ExplanationReport, ReportError, ReportMeta};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MODEL: i32 = 4;
pub const EXIT_EXPLAIN: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("cannot write `{path}`: {source}")]
    Write {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Input(_) | Self::Write { .. } | Self::Data(_) | Self::Report(_) => EXIT_DATA,
            Self::Model(_) => EXIT_MODEL,
            Self::Explain(ExplainError::Model(_)) => EXIT_MODEL,
            Self::Explain(_) => EXIT_EXPLAIN,
            Self::Eval(e) => match e {
                EvalError::Data(_) | EvalError::Csv(_) => EXIT_DATA,
                EvalError::Model(_) | EvalError::Explain(ExplainError::Model(_)) => EXIT_MODEL,
                EvalError::InvalidP(_) | EvalError::InvalidAlpha(_) | EvalError::UnknownStrategy(_) => EXIT_USAGE,
                _ => EXIT_EXPLAIN,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "leafage", version, about = "Example-based local explanations for black-box binary classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the two-Gaussian artificial dataset as CSV.
    GenAd(GenAdArgs),
    /// Explain one prediction and write a JSON report.
    Explain(ExplainArgs),
    /// Local-fidelity comparison over (dataset, classifier) settings.
    Evaluate(EvaluateArgs),
    /// Render an existing JSON report as SVG and/or HTML.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct GenAdArgs {
    #[arg(long, default_value_t = 250)]
    pub n_per_class: usize,
    #[arg(long, env = "LEAFAGE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Keep class proportions in both partitions.
    #[arg(long)]
    pub stratified: bool,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// CSV with a header row; split into train/test partitions.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Class treated as positive (one-vs-rest) when the data has more than
    /// two classes.
    #[arg(long)]
    pub positive_class: Option<String>,
    /// lr, svm, lda, dt, rf, knn or external.
    #[arg(long, default_value = "lr")]
    pub model: String,
    /// Hyperparameter override, `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Per-request timeout for an external model.
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
    /// Row of the test partition to explain.
    #[arg(long, conflicts_with = "instance", required_unless_present = "instance")]
    pub test_row: Option<usize>,
    /// Instance as a JSON object mapping every feature column to a number.
    #[arg(long)]
    pub instance: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub i_small: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, env = "LEAFAGE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub html: Option<PathBuf>,
    /// Command of an external model, after `--`.
    #[arg(last = true)]
    pub model_command: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV paths, or `ad` for the generated artificial dataset.
    #[arg(long = "dataset", required = true)]
    pub datasets: Vec<String>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long, value_delimiter = ',', default_value = "lr,svm,lda,dt,rf,knn")]
    pub classifiers: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "leafage,lime,baseline")]
    pub strategies: Vec<String>,
    #[arg(long, default_value_t = 0.95)]
    pub p: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// enemy-quantile or enemy-share.
    #[arg(long, default_value = "enemy-quantile")]
    pub sphere_rule: String,
    #[arg(long, default_value_t = 250)]
    pub ad_n_per_class: usize,
    #[arg(long, default_value_t = 10)]
    pub i_small: usize,
    #[arg(long, default_value_t = 5000)]
    pub lime_samples: usize,
    #[arg(long, env = "LEAFAGE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Results CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Aligned text table path; stdout when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub html: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are printed to stderr.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("\nFor more information, try '--help'.");
            }
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenAd(a) => gen_ad(&a),
        Command::Explain(a) => cmd_explain(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Render(a) => cmd_render(&a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn gen_ad(a: &GenAdArgs) -> Result<(), CliError> {
    let ds = data::generate_artificial(a.n_per_class, a.seed)?;
    let mut w = create(&a.out)?;
    data::write_csv(&ds, &mut w, "label")?;
    w.flush().map_err(|source| CliError::Write {
        path: a.out.display().to_string(),
        source,
    })
}

fn parse_params(params: &[String]) -> Result<Hyperparams, CliError> {
    params
        .iter()
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--param expects KEY=VALUE, got `{p}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--param `{k}` needs a numeric value, got `{v}`")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn split_spec(split: &SplitArgs, seed: u64) -> SplitSpec {
    SplitSpec {
        train_fraction: split.train_fraction,
        seed,
        stratified: split.stratified,
    }
}

/// Black box fed original-unit rows while the explainer works in
/// standardized space.
struct OriginalUnits<'a, M> {
    inner: M,
    scaler: &'a Standardizer,
}

impl<M: BlackBoxModel> BlackBoxModel for OriginalUnits<'_, M> {
    fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, ModelError> {
        let raw: Vec<Vec<f64>> = rows.iter().map(|r| self.scaler.inverse_row(r)).collect();
        self.inner.predict_labels(&raw)
    }

    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }
}

fn binary_view(ds: Dataset, positive: Option<&str>) -> Result<Dataset, CliError> {
    match positive {
        Some(p) => Ok(data::one_vs_rest(&ds, p)?),
        None if ds.class_names().len() == 2 => Ok(ds),
        None => Err(CliError::Input(format!(
            "dataset has {} classes; choose one with --positive-class",
            ds.class_names().len()
        ))),
    }
}

fn parse_instance(text: &str, columns: &[String]) -> Result<Vec<f64>, CliError> {
    let map: IndexMap<String, f64> =
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("--instance is not a JSON object of numbers: {e}")))?;
    if let Some(extra) = map.keys().find(|k| !columns.contains(k)) {
        return Err(CliError::Usage(format!("--instance has unknown feature `{extra}`")));
    }
    columns
        .iter()
        .map(|c| {
            map.get(c)
                .copied()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("--instance needs a finite value for `{c}`")))
        })
        .collect()
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn cmd_explain(a: &ExplainArgs) -> Result<(), CliError> {
    let cfg = LeafageConfig {
        i_small: a.i_small,
        k_examples: a.k,
        seed: a.seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let external = a.model.eq_ignore_ascii_case("external");
    if external && a.model_command.is_empty() {
        return Err(CliError::Usage("--model external needs a command after `--`".into()));
    }
    if !external && !a.model_command.is_empty() {
        return Err(CliError::Usage("a model command after `--` requires --model external".into()));
    }
    let kind = if external {
        None
    } else {
        Some(a.model.parse::<ClassifierKind>().map_err(|e| CliError::Usage(e.to_string()))?)
    };
    let hyperparams = parse_params(&a.params)?;

    let ds = binary_view(data::load_csv(&a.data, &a.label_column)?, a.positive_class.as_deref())?;
    // Validate the instance before any training so usage errors surface first.
    let inline = a.instance.as_deref().map(|t| parse_instance(t, ds.column_names())).transpose()?;
    let (train, test) = data::train_test_split(&ds, &split_spec(&a.split, a.seed))?;
    let scaler = Standardizer::fit(&train);
    let train_std = scaler.transform(&train)?;

    let z_raw = match (inline, a.test_row) {
        (Some(z), _) => z,
        (None, Some(i)) => {
            if i >= test.n_rows() {
                return Err(CliError::Usage(format!(
                    "--test-row {i} out of range; the test partition has {} rows",
                    test.n_rows()
                )));
            }
            test.row(i).to_vec()
        }
        (None, None) => return Err(CliError::Usage("give --test-row or --instance".into())),
    };
    let z = scaler.transform_row(&z_raw);

    let model: Box<dyn BlackBoxModel + '_> = match kind {
        Some(kind) => Box::new(fit(kind, &train_std, &hyperparams, a.seed)?),
        None => Box::new(OriginalUnits {
            inner: ExternalModel::spawn(&a.model_command, Duration::from_millis(a.timeout_ms))?,
            scaler: &scaler,
        }),
    };
    let descriptor = match kind {
        Some(_) => format!("{} (trained on standardized features)", model.descriptor()),
        None => model.descriptor(),
    };
    let explanation = Leafage::new(&*model, &train_std, &scaler)?.explain(&z, &cfg)?;
    let report = ExplanationReport::new(
        &explanation,
        &ReportMeta {
            dataset: &dataset_name(&a.data),
            model: &descriptor,
            column_names: ds.column_names(),
            class_names: ds.class_names(),
            seed: a.seed,
            config: &cfg,
        },
    );
    let json = report.to_json()?;
    match &a.out {
        Some(path) => write_file(path, &json)?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(json.as_bytes()).map_err(|source| CliError::Write {
                path: "<stdout>".into(),
                source,
            })?;
        }
    }
    write_views(&report, a.svg.as_deref(), a.html.as_deref())
}

fn write_views(report: &ExplanationReport, svg: Option<&Path>, html: Option<&Path>) -> Result<(), CliError> {
    if let Some(path) = svg {
        write_file(path, &render_svg(report))?;
    }
    if let Some(path) = html {
        write_file(path, &render_html(report))?;
    }
    Ok(())
}

pub fn cmd_render(a: &RenderArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.report).map_err(|source| {
        CliError::Data(DataError::Io {
            path: a.report.display().to_string(),
            source,
        })
    })?;
    let report = ExplanationReport::from_json(&text)?;
    if a.svg.is_none() && a.html.is_none() {
        return Err(CliError::Usage("render needs --svg and/or --html".into()));
    }
    write_views(&report, a.svg.as_deref(), a.html.as_deref())
}

fn parse_rule(s: &str) -> Result<SphereRule, CliError> {
    match s {
        "enemy-quantile" => Ok(SphereRule::EnemyQuantile),
        "enemy-share" => Ok(SphereRule::EnemyShare),
        _ => Err(CliError::Usage(format!(
            "unknown sphere rule `{s}` (expected enemy-quantile or enemy-share)"
        ))),
    }
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    if !(a.p > 0.0 && a.p < 1.0) {
        return Err(CliError::Usage(format!("--p must lie in (0, 1), got {}", a.p)));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let classifiers = a
        .classifiers
        .iter()
        .map(|c| c.parse::<ClassifierKind>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let strategies = a
        .strategies
        .iter()
        .map(|s| s.parse::<Strategy>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = EvaluationConfig {
        hyperparams: Hyperparams::new(),
        classifier_seed: a.seed,
        leafage: LeafageConfig {
            i_small: a.i_small,
            seed: a.seed,
            ..LeafageConfig::default()
        },
        lime: LimeConfig {
            n_samples: a.lime_samples,
            sigma: None,
            seed: a.seed,
        },
        fidelity: FidelityConfig {
            p: a.p,
            rule: parse_rule(&a.sphere_rule)?,
        },
    };
    cfg.leafage.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let mut summaries = Vec::new();
    for source in &a.datasets {
        let (name, ds) = if source == "ad" {
            ("ad".to_string(), data::generate_artificial(a.ad_n_per_class, a.seed)?)
        } else {
            let path = Path::new(source);
            (dataset_name(path), data::load_csv(path, &a.label_column)?)
        };
        // Binary data contributes one setting per classifier; multi-class
        // data one per class.
        let positives: Vec<String> = if ds.class_names().len() == 2 {
            vec![ds.class_names()[1].clone()]
        } else {
            ds.class_names().to_vec()
        };
        for positive in positives {
            let binary = if ds.class_names().len() == 2 {
                ds.clone()
            } else {
                data::one_vs_rest(&ds, &positive)?
            };
            let (train, test) = data::train_test_split(&binary, &split_spec(&a.split, a.seed))?;
            for &kind in &classifiers {
                let key = SettingKey {
                    dataset: name.clone(),
                    positive_class: positive.clone(),
                    classifier: kind.name().to_string(),
                };
                log::info!("evaluating {key}");
                summaries.extend(run_setting(&key, &train, &test, kind, &strategies, &cfg)?);
            }
        }
    }
    let rows = results_table(&summaries, a.alpha)?;
    let mut w = create(&a.out)?;
    write_table_csv(&rows, &mut w)?;
    w.flush().map_err(|source| CliError::Write {
        path: a.out.display().to_string(),
        source,
    })?;
    let table = format_table(&rows, &strategies);
    match &a.table {
        Some(path) => write_file(path, &table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

/// One line per setting, one column per strategy; bold cells carry `*`.
pub fn format_table(rows: &[TableRow], strategies: &[Strategy]) -> String {
    let mut settings: Vec<&SettingKey> = Vec::new();
    for r in rows {
        if !settings.contains(&&r.setting) {
            settings.push(&r.setting);
        }
    }
    let mut grid: Vec<Vec<String>> = vec![std::iter::once("setting".to_string())
        .chain(strategies.iter().map(|s| s.name().to_string()))
        .collect()];
    for key in settings {
        let mut line = vec![key.to_string()];
        for s in strategies {
            let cell = rows
                .iter()
                .find(|r| &r.setting == key && r.strategy == *s)
                .map_or_else(|| "-".to_string(), |r| format!("{}{}", r.cell(), if r.bold { "*" } else { "" }));
            line.push(cell);
        }
        grid.push(line);
    }
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|c| grid.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &grid {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out.push_str("* best mean, or not significantly different from it\n");
    out
}
