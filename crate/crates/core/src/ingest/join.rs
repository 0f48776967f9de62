//! Join filtered EMA sessions, image feature vectors, and demographics into
//! the analysis dataset. Every image row lands in exactly one bucket:
//! joined, orphan, excluded-session, or missing-demographics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Provenance, SampleMeta};
use crate::error::{Error, Result};
use crate::ingest::{Demographics, FeatureRecord, FilterOutcome};
use crate::matrix::Matrix;
use crate::psychometrics::{self, PhqClass};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JoinConfig {
    pub depression_threshold: f64,
    /// Strict mode turns missing demographics into a fatal error instead of
    /// a counted drop.
    pub strict: bool,
}

impl Default for JoinConfig {
    fn default() -> Self {
        Self {
            depression_threshold: psychometrics::DEFAULT_THRESHOLD,
            strict: false,
        }
    }
}

/// Image ids that did not make it into the dataset, by reason.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DropReport {
    pub orphan_images: Vec<String>,
    pub excluded_session_images: Vec<String>,
    pub missing_demographics_images: Vec<String>,
}

pub fn join_dataset(
    filtered: &FilterOutcome,
    features: &[FeatureRecord],
    demographics: &[Demographics],
    feature_names: &[String],
    config: &JoinConfig,
) -> Result<(Dataset, DropReport)> {
    let n_features = feature_names.len();
    // Kept sessions keyed by (participant, session); duplicates would make
    // the label ambiguous, so they are rejected outright.
    let mut kept: BTreeMap<(&str, &str), &crate::ingest::EmaRecord> = BTreeMap::new();
    for record in &filtered.kept {
        let key = (record.participant_id.as_str(), record.session_id.as_str());
        if kept.insert(key, record).is_some() {
            return Err(Error::Validation(format!(
                "duplicate EMA session {}/{}",
                record.participant_id, record.session_id
            )));
        }
    }
    let excluded: BTreeSet<(&str, &str)> = filtered
        .excluded
        .iter()
        .map(|e| (e.record.participant_id.as_str(), e.record.session_id.as_str()))
        .collect();
    let demo_by_pid: BTreeMap<&str, &Demographics> = demographics
        .iter()
        .map(|d| (d.participant_id.as_str(), d))
        .collect();

    let mut data: Vec<f64> = Vec::with_capacity(features.len() * n_features);
    let mut meta: Vec<SampleMeta> = Vec::new();
    let mut drops = DropReport::default();

    for record in features {
        if record.values.len() != n_features {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                got: record.values.len(),
            });
        }
        let key = (record.participant_id.as_str(), record.session_id.as_str());
        let Some(ema) = kept.get(&key) else {
            if excluded.contains(&key) {
                drops.excluded_session_images.push(record.image_id.clone());
            } else {
                drops.orphan_images.push(record.image_id.clone());
            }
            continue;
        };
        let Some(demo) = demo_by_pid.get(record.participant_id.as_str()) else {
            if config.strict {
                return Err(Error::Validation(format!(
                    "no demographics for participant {}",
                    record.participant_id
                )));
            }
            drops.missing_demographics_images.push(record.image_id.clone());
            continue;
        };
        let total = psychometrics::total_score(ema);
        data.extend_from_slice(&record.values);
        meta.push(SampleMeta {
            participant_id: record.participant_id.clone(),
            session_id: record.session_id.clone(),
            image_id: record.image_id.clone(),
            timestamp: ema.timestamp,
            total_score: total,
            depressed: psychometrics::classify(total, config.depression_threshold)
                == PhqClass::Depressed,
            gender: demo.gender,
            race: demo.race,
            age: demo.age,
            response_duration: ema.response_duration,
            confidence: record.confidence,
            success: record.success,
        });
    }

    let provenance = Provenance {
        feature_records: features.len(),
        joined: meta.len(),
        orphan_images: drops.orphan_images.len(),
        excluded_session_images: drops.excluded_session_images.len(),
        missing_demographics_images: drops.missing_demographics_images.len(),
        ema_total: filtered.total(),
        ema_kept: filtered.kept.len(),
        ema_excluded: filtered.excluded.len(),
    };
    debug_assert!(provenance.is_conserved());

    let dataset = Dataset {
        features: Matrix::from_vec(meta.len(), n_features, data)?,
        feature_names: feature_names.to_vec(),
        meta,
        provenance,
        depression_threshold: config.depression_threshold,
    };
    Ok((dataset, drops))
}
