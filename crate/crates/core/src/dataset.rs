//! Joined image-level dataset: one row per face image, labelled with the
//! session score and participant demographics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{Gender, Race};
use crate::matrix::Matrix;

/// Per-sample metadata carried alongside the feature matrix. Everything a
/// downstream report needs to group or audit rows without re-joining files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub participant_id: String,
    pub session_id: String,
    pub image_id: String,
    pub timestamp: i64,
    pub total_score: f64,
    pub depressed: bool,
    pub gender: Gender,
    pub race: Race,
    pub age: f64,
    /// Seconds the participant spent on the session's survey.
    pub response_duration: f64,
    pub confidence: f64,
    pub success: bool,
}

/// Row-accounting from the join. The four disposition counters partition the
/// feature file: every image row lands in exactly one bucket.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub feature_records: usize,
    pub joined: usize,
    pub orphan_images: usize,
    pub excluded_session_images: usize,
    pub missing_demographics_images: usize,
    pub ema_total: usize,
    pub ema_kept: usize,
    pub ema_excluded: usize,
}

impl Provenance {
    pub fn is_conserved(&self) -> bool {
        self.joined
            + self.orphan_images
            + self.excluded_session_images
            + self.missing_demographics_images
            == self.feature_records
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix<f64>,
    pub feature_names: Vec<String>,
    pub meta: Vec<SampleMeta>,
    pub provenance: Provenance,
    pub depression_threshold: f64,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    /// Binary labels for classification (true = depressed).
    pub fn class_labels(&self) -> Vec<bool> {
        self.meta.iter().map(|m| m.depressed).collect()
    }

    /// Continuous labels for regression (session total score).
    pub fn score_labels(&self) -> Vec<f64> {
        self.meta.iter().map(|m| m.total_score).collect()
    }

    /// Rows per participant, keyed in sorted order so iteration is stable.
    pub fn participant_rows(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (row, meta) in self.meta.iter().enumerate() {
            map.entry(meta.participant_id.as_str()).or_default().push(row);
        }
        map
    }

    pub fn n_participants(&self) -> usize {
        self.participant_rows().len()
    }

    /// New dataset restricted to the given feature columns (in the order
    /// given). Metadata and provenance carry over unchanged.
    pub fn project_features(&self, columns: &[usize]) -> Result<Dataset> {
        for &c in columns {
            if c >= self.n_features() {
                return Err(Error::InvalidArgument(format!(
                    "feature column {c} out of range for {} features",
                    self.n_features()
                )));
            }
        }
        Ok(Dataset {
            features: self.features.select_columns(columns),
            feature_names: columns
                .iter()
                .map(|&c| self.feature_names[c].clone())
                .collect(),
            meta: self.meta.clone(),
            provenance: self.provenance.clone(),
            depression_threshold: self.depression_threshold,
        })
    }

    /// New dataset restricted to the given rows (in the order given).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        for &r in rows {
            if r >= self.n_samples() {
                return Err(Error::InvalidArgument(format!(
                    "row {r} out of range for {} samples",
                    self.n_samples()
                )));
            }
        }
        Ok(Dataset {
            features: self.features.select_rows(rows),
            feature_names: self.feature_names.clone(),
            meta: rows.iter().map(|&r| self.meta[r].clone()).collect(),
            provenance: self.provenance.clone(),
            depression_threshold: self.depression_threshold,
        })
    }

    /// SHA-256 over the serialized dataset; stable across runs because the
    /// JSON encoder round-trips every float exactly and field order is fixed.
    pub fn content_hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        Ok(format!("{:x}", hasher.finalize()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Dataset> {
        Ok(serde_json::from_str(text)?)
    }
}
