//! Local explanations for black-box binary classifiers.
//!
//! The explainer works from real training rows: it locates the closest
//! training row of the opposite predicted class, fits a linear surrogate on
//! the rows around it, and reports per-feature importances together with the
//! most similar training rows of each class under a dissimilarity measure
//! shaped by that surrogate. A simplified LIME baseline and an AUC-based
//! local-fidelity protocol are included for comparison.

pub mod data;
pub mod evaluation;
pub mod explainer;
pub mod lime;
pub mod linalg;
pub mod models;
pub mod report;
pub mod cli;

pub use data::{Dataset, SplitSpec, Standardizer};
pub use explainer::{Explanation, LeafageConfig, Leafage, LocalSurrogate};
pub use lime::LimeConfig;
pub use models::{BlackBoxModel, Classifier, ClassifierKind};
