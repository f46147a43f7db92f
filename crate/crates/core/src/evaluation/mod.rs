//! Local-fidelity evaluation: fidelity spheres, AUC scoring, paired
//! significance tests and result tables.

mod auc;
mod setting;
mod sphere;
mod table;
mod wilcoxon;

use thiserror::Error;

pub use auc::auc;
pub use setting::{
    evaluate_model, local_fidelity, run_setting, EvaluationConfig, FidelityConfig, FidelitySummary, InstanceScore,
    SettingKey, Strategy,
};
pub use sphere::{fidelity_sphere, Skip, Sphere, SphereRule};
pub use table::{results_table, write_table_csv, TableRow};
pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_signed_rank_with, PValueMethod, WilcoxonOutcome, WilcoxonResult, EXACT_MAX_N,
    MIN_NONZERO,
};

use crate::data::DataError;
use crate::explainer::ExplainError;
use crate::models::ModelError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("score is not a number: {0}")]
    NonFiniteScore(f64),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("fraction p must lie in (0, 1), got {0}")]
    InvalidP(f64),
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
