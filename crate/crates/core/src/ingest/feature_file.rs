//! Facial-feature CSV parsing against the 709-name registry.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowDiagnostic};
use crate::ingest::ParseMode;
use crate::registry::{FeatureRegistry, FeatureSet};

/// One image's feature vector. `values` is in registry order; the two
/// metadata columns are parsed but never fed to a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub participant_id: String,
    pub session_id: String,
    pub image_id: String,
    pub values: Vec<f64>,
    pub confidence: f64,
    pub success: bool,
}

#[derive(Debug, Clone, Default)]
pub struct FeatureParse {
    pub records: Vec<FeatureRecord>,
    pub diagnostics: Vec<RowDiagnostic>,
}

/// Full header of a feature file: id columns, the registry names, then the
/// two non-trainable metadata columns.
pub fn feature_file_header(registry: &FeatureRegistry) -> Vec<String> {
    let mut header = vec![
        "participant_id".to_string(),
        "session_id".to_string(),
        "image_id".to_string(),
    ];
    header.extend(registry.names().iter().cloned());
    header.push("confidence".to_string());
    header.push("success".to_string());
    header
}

/// Maps each registry feature to its column position in the file at hand.
struct ColumnMap {
    /// `feature_cols[i]` = file column index of registry feature `i`.
    feature_cols: Vec<usize>,
    participant_col: usize,
    session_col: usize,
    image_col: usize,
    confidence_col: usize,
    success_col: usize,
}

fn build_column_map(headers: &csv::StringRecord, registry: &FeatureRegistry) -> Result<ColumnMap> {
    let mut feature_cols = vec![usize::MAX; registry.len()];
    let mut participant_col = None;
    let mut session_col = None;
    let mut image_col = None;
    let mut confidence_col = None;
    let mut success_col = None;

    for (col, raw) in headers.iter().enumerate() {
        let name = raw.trim();
        match name {
            "participant_id" => participant_col = Some(col),
            "session_id" => session_col = Some(col),
            "image_id" => image_col = Some(col),
            "confidence" => confidence_col = Some(col),
            "success" => success_col = Some(col),
            _ => {
                let idx = registry.index_of(name).ok_or_else(|| {
                    Error::Schema(format!("unknown feature column `{name}`"))
                })?;
                if feature_cols[idx] != usize::MAX {
                    return Err(Error::Schema(format!("duplicate feature column `{name}`")));
                }
                feature_cols[idx] = col;
            }
        }
    }

    if let Some(missing) = feature_cols.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Schema(format!(
            "missing registry column `{}` (group {})",
            registry.name(missing),
            registry.group_of(missing)
        )));
    }
    // Cross-check the per-group column counts against the registry sizes.
    for set in FeatureSet::ALL {
        let count = registry
            .group_indices(set)
            .iter()
            .filter(|&&i| feature_cols[i] != usize::MAX)
            .count();
        if count != set.size() {
            return Err(Error::Schema(format!(
                "feature group {set} has {count} columns, expected {}",
                set.size()
            )));
        }
    }

    Ok(ColumnMap {
        feature_cols,
        participant_col: participant_col
            .ok_or_else(|| Error::Schema("missing `participant_id` column".into()))?,
        session_col: session_col.ok_or_else(|| Error::Schema("missing `session_id` column".into()))?,
        image_col: image_col.ok_or_else(|| Error::Schema("missing `image_id` column".into()))?,
        confidence_col: confidence_col
            .ok_or_else(|| Error::Schema("missing `confidence` column".into()))?,
        success_col: success_col.ok_or_else(|| Error::Schema("missing `success` column".into()))?,
    })
}

fn parse_row(record: &csv::StringRecord, map: &ColumnMap) -> std::result::Result<FeatureRecord, String> {
    let get = |col: usize, name: &str| -> std::result::Result<&str, String> {
        record
            .get(col)
            .map(str::trim)
            .ok_or_else(|| format!("missing field `{name}`"))
    };
    let participant_id = get(map.participant_col, "participant_id")?.to_string();
    let session_id = get(map.session_col, "session_id")?.to_string();
    let image_id = get(map.image_col, "image_id")?.to_string();
    if participant_id.is_empty() || session_id.is_empty() || image_id.is_empty() {
        return Err("empty id field".into());
    }

    let mut values = Vec::with_capacity(map.feature_cols.len());
    for (i, &col) in map.feature_cols.iter().enumerate() {
        let raw = record.get(col).map(str::trim).unwrap_or("");
        let v: f64 = raw
            .parse()
            .map_err(|_| format!("feature column {i}: cannot parse `{raw}`"))?;
        if !v.is_finite() {
            return Err(format!("feature column {i}: non-finite value `{raw}`"));
        }
        values.push(v);
    }

    let confidence: f64 = {
        let raw = get(map.confidence_col, "confidence")?;
        raw.parse()
            .map_err(|_| format!("confidence: cannot parse `{raw}`"))?
    };
    if !(0.0..=1.0).contains(&confidence) {
        return Err(format!("confidence {confidence} outside [0,1]"));
    }
    let success = match get(map.success_col, "success")? {
        "1" | "true" => true,
        "0" | "false" => false,
        other => return Err(format!("success: expected 0/1/true/false, got `{other}`")),
    };

    Ok(FeatureRecord {
        participant_id,
        session_id,
        image_id,
        values,
        confidence,
        success,
    })
}

/// Parse a feature CSV stream, validating the header against the registry.
pub fn parse_feature_file<R: Read>(
    reader: R,
    registry: &FeatureRegistry,
    mode: ParseMode,
) -> Result<FeatureParse> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let map = build_column_map(csv_reader.headers()?, registry)?;

    let mut out = FeatureParse::default();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    loop {
        match csv_reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                row += 1;
                match parse_row(&record, &map) {
                    Ok(rec) => out.records.push(rec),
                    Err(message) => out.diagnostics.push(RowDiagnostic { row, message }),
                }
            }
            Err(e) => {
                row += 1;
                out.diagnostics.push(RowDiagnostic {
                    row,
                    message: format!("malformed csv row: {e}"),
                });
            }
        }
    }
    if mode == ParseMode::Strict && !out.diagnostics.is_empty() {
        return Err(Error::RowErrors(out.diagnostics));
    }
    Ok(out)
}
