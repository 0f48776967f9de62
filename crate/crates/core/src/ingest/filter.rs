//! The reversed-item attention filter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EmaRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedEma {
    pub record: EmaRecord,
    pub discrepancy: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<EmaRecord>,
    pub excluded: Vec<ExcludedEma>,
}

impl FilterOutcome {
    pub fn total(&self) -> usize {
        self.kept.len() + self.excluded.len()
    }
}

/// Discrepancy between an item response and its reversed duplicate: the
/// reversed response `r` is reflected back onto the original scale as
/// `100 - r` before comparison.
pub fn attention_discrepancy(record: &EmaRecord) -> f64 {
    let original = record.item_scores[record.attention.original_index];
    (original - (100.0 - record.attention.reversed_score)).abs()
}

/// Keep a record iff its attention discrepancy is within `tolerance`
/// (0-100 scale). Order is preserved on both sides of the partition.
pub fn attention_filter(records: Vec<EmaRecord>, tolerance: f64) -> Result<FilterOutcome> {
    if !(0.0..=100.0).contains(&tolerance) {
        return Err(Error::InvalidArgument(format!(
            "attention tolerance {tolerance} outside [0,100]"
        )));
    }
    let mut outcome = FilterOutcome::default();
    for record in records {
        let discrepancy = attention_discrepancy(&record);
        if discrepancy <= tolerance {
            outcome.kept.push(record);
        } else {
            let reason = format!(
                "reversed-item discrepancy {discrepancy:.2} exceeds tolerance {tolerance:.2}"
            );
            outcome.excluded.push(ExcludedEma {
                record,
                discrepancy,
                reason,
            });
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AttentionItem;

    fn record(item: f64, index: usize, reversed: f64) -> EmaRecord {
        let mut item_scores = [50.0; 8];
        item_scores[index] = item;
        EmaRecord {
            participant_id: "p".into(),
            session_id: format!("s{item}-{reversed}"),
            timestamp: 0,
            item_scores,
            attention: AttentionItem {
                original_index: index,
                reversed_score: reversed,
            },
            response_duration: 10.0,
        }
    }

    #[test]
    fn consistent_pair_is_kept() {
        // item 80 vs reflected reversed 100-20=80: discrepancy 0.
        let outcome = attention_filter(vec![record(80.0, 3, 20.0)], 25.0).unwrap();
        assert_eq!(outcome.kept.len(), 1);
        assert!(outcome.excluded.is_empty());
    }

    #[test]
    fn discrepant_pair_is_excluded() {
        // item 80 vs reflected 100-80=20: discrepancy 60 > 25.
        let outcome = attention_filter(vec![record(80.0, 3, 80.0)], 25.0).unwrap();
        assert!(outcome.kept.is_empty());
        assert_eq!(outcome.excluded.len(), 1);
        assert!((outcome.excluded[0].discrepancy - 60.0).abs() < 1e-12);
    }

    #[test]
    fn max_tolerance_keeps_everything() {
        let records: Vec<EmaRecord> = (0..20)
            .map(|i| record(i as f64 * 5.0, (i % 8) as usize, 100.0 - i as f64))
            .collect();
        let outcome = attention_filter(records.clone(), 100.0).unwrap();
        assert_eq!(outcome.kept.len(), records.len());
    }

    #[test]
    fn partition_preserves_order_and_multiset() {
        let records = vec![
            record(80.0, 0, 20.0), // kept
            record(80.0, 1, 80.0), // excluded
            record(10.0, 2, 90.0), // kept
            record(0.0, 3, 0.0),   // excluded (discrepancy 100)
        ];
        let outcome = attention_filter(records.clone(), 25.0).unwrap();
        assert_eq!(outcome.kept.len() + outcome.excluded.len(), records.len());
        assert_eq!(outcome.kept[0].session_id, records[0].session_id);
        assert_eq!(outcome.kept[1].session_id, records[2].session_id);
        assert_eq!(outcome.excluded[0].record.session_id, records[1].session_id);
    }

    #[test]
    fn tolerance_is_validated() {
        assert!(attention_filter(vec![], 101.0).is_err());
        assert!(attention_filter(vec![], -0.5).is_err());
    }
}
