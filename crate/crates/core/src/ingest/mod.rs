//! File ingestion: EMA surveys, facial-feature vectors, demographics, and
//! the joins that turn them into an analysis dataset.

mod demographics;
mod ema;
mod feature_file;
mod filter;
mod join;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use demographics::{parse_demographics_file, Demographics, Gender, Race, DEMOGRAPHICS_HEADER};
pub use ema::{parse_ema_file, AttentionItem, EmaParse, EmaRecord, EMA_HEADER, EMA_ITEM_COUNT};
pub use feature_file::{feature_file_header, parse_feature_file, FeatureParse, FeatureRecord};
pub use filter::{attention_discrepancy, attention_filter, ExcludedEma, FilterOutcome};
pub use join::{join_dataset, DropReport, JoinConfig};

use crate::dataset::Dataset;
use crate::error::{Error, Result, RowDiagnostic};
use crate::registry::FeatureRegistry;

/// Row-level error handling for the CSV parsers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Skip invalid rows, reporting one diagnostic per rejection.
    #[default]
    Lenient,
    /// Any invalid row fails the whole parse.
    Strict,
}

/// Everything `load_dataset` decided along the way, for the run manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub ema_diagnostics: Vec<RowDiagnostic>,
    pub feature_diagnostics: Vec<RowDiagnostic>,
    pub drops: DropReport,
    pub attention_tolerance: f64,
    pub depression_threshold: f64,
}

/// Parse the three input files, run the attention filter, and join into a
/// dataset. This is the one ingestion path both the CLI and tests use.
pub fn load_dataset(
    ema_path: &Path,
    features_path: &Path,
    demographics_path: &Path,
    tolerance: f64,
    threshold: f64,
    strict: bool,
) -> Result<(Dataset, IngestReport)> {
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let open = |path: &Path| -> Result<BufReader<File>> {
        File::open(path)
            .map(BufReader::new)
            .map_err(|e| Error::Validation(format!("cannot open {}: {e}", path.display())))
    };

    let ema = parse_ema_file(open(ema_path)?, mode)?;
    let registry = FeatureRegistry::standard();
    let features = parse_feature_file(open(features_path)?, &registry, mode)?;
    let demographics = parse_demographics_file(open(demographics_path)?, mode)?;

    let filtered = attention_filter(ema.records, tolerance)?;
    let config = JoinConfig { depression_threshold: threshold, strict };
    let (dataset, drops) = join_dataset(
        &filtered,
        &features.records,
        &demographics,
        registry.names(),
        &config,
    )?;

    let report = IngestReport {
        ema_diagnostics: ema.diagnostics,
        feature_diagnostics: features.diagnostics,
        drops,
        attention_tolerance: tolerance,
        depression_threshold: threshold,
    };
    Ok((dataset, report))
}
