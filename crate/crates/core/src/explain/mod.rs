//! Model explainability: exact TreeSHAP for forests, permutation
//! importance, and ranked importance reports.

pub mod permutation;
pub mod report;
pub mod treeshap;

pub use permutation::{permutation_importance, ImportanceMetric};
pub use report::{top_k_report, ImportanceReport, RankedFeature};
pub use treeshap::{recompute_covers, tree_shap, tree_shap_batch, Attribution};
