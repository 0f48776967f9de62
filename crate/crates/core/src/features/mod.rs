//! Feature-space tooling: standardization, mutual-information scoring, and
//! fraction-based selection.

pub mod mi;
pub mod scaler;
pub mod select;

pub use mi::{equal_frequency_bins, mi_scores, mi_scores_opts, mutual_information, quartile_bin_labels, FeatureScore};
pub use scaler::{apply_scaler, fit_scaler, ScalerParams};
pub use select::{select_fraction, select_group, SelectionMode};
