//! facephq: depression screening research pipeline over EMA surveys and
//! per-image facial features.
//!
//! The crate covers the full path from raw CSVs to reports:
//!
//! - [`ingest`]: parsing, attention filtering, and the image-level join
//! - [`psychometrics`] and [`annotations`]: survey reliability and rater
//!   agreement statistics
//! - [`features`]: standardization and mutual-information selection
//! - [`models`]: from-scratch logistic regression, elastic net, and random
//!   forests
//! - [`eval`]: subject-disjoint cross-validation, nested tuning, ablation,
//!   and subgroup bias reports
//! - [`explain`]: exact per-tree Shapley values and permutation importance
//! - [`synth`]: a deterministic synthetic-cohort generator with a recorded
//!   generating process, used as the test oracle
//!
//! Numeric kernels are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the pipeline itself runs on [`Value`]. All randomness flows from
//! explicit seeds, and repeated runs are byte-identical regardless of
//! thread count.

pub mod annotations;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod manifest;
pub mod matrix;
pub mod models;
pub mod psychometrics;
pub mod registry;
pub mod scalar;
pub mod stats;
pub mod synth;
pub mod table;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

/// Scalar type the concrete pipeline runs on.
pub type Value = f64;
/// Design matrix at pipeline precision.
pub type DenseMatrix = Matrix<Value>;
/// Fitted forest at pipeline precision.
pub type Forest = models::RandomForest<Value>;
/// Any fitted model at pipeline precision.
pub type Model = models::AnyModel<Value>;
/// Per-row Shapley attribution at pipeline precision.
pub type ShapValues = explain::Attribution<Value>;
