//! Ground-truth construction from the rescaled eight-item survey, plus the
//! reliability statistics reported alongside it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EmaRecord;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::stats::{sample_std, sample_variance};

/// Default depression cut on the 0–800 total scale. The instrument's 10/24
/// cut maps to 333.33; the integer cutoff is applied inclusively.
pub const DEFAULT_THRESHOLD: f64 = 334.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhqClass {
    Depressed,
    NotDepressed,
}

impl PhqClass {
    pub fn as_bool(self) -> bool {
        self == PhqClass::Depressed
    }
}

pub fn total_score(record: &EmaRecord) -> f64 {
    record.item_scores.iter().sum()
}

/// Depressed iff `total >= threshold`.
pub fn classify(total: f64, threshold: f64) -> PhqClass {
    if total >= threshold {
        PhqClass::Depressed
    } else {
        PhqClass::NotDepressed
    }
}

/// Cronbach's alpha on a respondents-by-items matrix:
/// `(k/(k-1)) * (1 - sum(item variances) / variance(row totals))`
/// with sample (n-1) variances throughout.
pub fn cronbach_alpha<F: Scalar>(items: &Matrix<F>) -> Result<F> {
    let (n, k) = (items.n_rows(), items.n_cols());
    if n < 2 || k < 2 {
        return Err(Error::InvalidArgument(format!(
            "cronbach_alpha needs >=2 respondents and >=2 items, got {n}x{k}"
        )));
    }
    let mut item_var_sum = F::zero();
    let mut col = vec![F::zero(); n];
    for j in 0..k {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = items.get(i, j);
        }
        item_var_sum += sample_variance(&col);
    }
    let totals: Vec<F> = (0..n).map(|i| items.row(i).iter().copied().sum()).collect();
    let total_var = sample_variance(&totals);
    if total_var <= F::zero() {
        return Err(Error::UndefinedStatistic(
            "total-score variance is zero; alpha undefined".into(),
        ));
    }
    let k_f = F::from_count(k);
    Ok(k_f / (k_f - F::one()) * (F::one() - item_var_sum / total_var))
}

/// Spread of one participant's session totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantVariability {
    pub participant_id: String,
    pub n_sessions: usize,
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilitySummary {
    pub per_participant: Vec<ParticipantVariability>,
    /// Participants skipped for having fewer than two sessions.
    pub omitted: Vec<String>,
    pub mean_std: Option<f64>,
    pub min_std: Option<f64>,
    pub max_std: Option<f64>,
}

/// Sample standard deviation of session totals per participant; participants
/// with fewer than two sessions are listed in `omitted` rather than scored.
pub fn intra_individual_variability(records: &[EmaRecord]) -> VariabilitySummary {
    let mut totals: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for record in records {
        totals
            .entry(record.participant_id.as_str())
            .or_default()
            .push(total_score(record));
    }
    let mut per_participant = Vec::new();
    let mut omitted = Vec::new();
    for (pid, scores) in &totals {
        if scores.len() < 2 {
            omitted.push((*pid).to_string());
        } else {
            per_participant.push(ParticipantVariability {
                participant_id: (*pid).to_string(),
                n_sessions: scores.len(),
                std_dev: sample_std(scores),
            });
        }
    }
    let stds: Vec<f64> = per_participant.iter().map(|p| p.std_dev).collect();
    let (mean_std, min_std, max_std) = if stds.is_empty() {
        (None, None, None)
    } else {
        (
            Some(stds.iter().sum::<f64>() / stds.len() as f64),
            Some(stds.iter().copied().fold(f64::INFINITY, f64::min)),
            Some(stds.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        )
    };
    VariabilitySummary {
        per_participant,
        omitted,
        mean_std,
        min_std,
        max_std,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub cronbach_alpha: f64,
    pub n_respondents: usize,
    pub n_items: usize,
    pub variability: VariabilitySummary,
}

/// Full reliability report over parsed EMA records: alpha on the per-session
/// item matrix plus intra-individual variability of the totals.
pub fn reliability_report(records: &[EmaRecord]) -> Result<ReliabilityReport> {
    let n = records.len();
    let k = crate::ingest::EMA_ITEM_COUNT;
    let mut data = Vec::with_capacity(n * k);
    for record in records {
        data.extend_from_slice(&record.item_scores);
    }
    let items = Matrix::from_vec(n, k, data)?;
    Ok(ReliabilityReport {
        cronbach_alpha: cronbach_alpha(&items)?,
        n_respondents: n,
        n_items: k,
        variability: intra_individual_variability(records),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AttentionItem;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ema(pid: &str, items: [f64; 8]) -> EmaRecord {
        EmaRecord {
            participant_id: pid.into(),
            session_id: "s".into(),
            timestamp: 0,
            item_scores: items,
            attention: AttentionItem {
                original_index: 0,
                reversed_score: 100.0 - items[0],
            },
            response_duration: 12.0,
        }
    }

    #[test]
    fn total_score_examples() {
        assert_eq!(total_score(&ema("p", [0.0; 8])), 0.0);
        assert_eq!(total_score(&ema("p", [100.0; 8])), 800.0);
        assert_eq!(total_score(&ema("p", [42.0; 8])), 336.0);
    }

    #[test]
    fn classify_boundary() {
        assert_eq!(classify(334.0, DEFAULT_THRESHOLD), PhqClass::Depressed);
        assert_eq!(classify(333.0, DEFAULT_THRESHOLD), PhqClass::NotDepressed);
        assert_eq!(classify(0.0, DEFAULT_THRESHOLD), PhqClass::NotDepressed);
        assert_eq!(classify(800.0, DEFAULT_THRESHOLD), PhqClass::Depressed);
    }

    #[test]
    fn alpha_is_one_for_perfectly_correlated_items() {
        // Every item column equals the same varying column.
        let rows: Vec<Vec<f64>> = [0.0, 50.0, 100.0, 25.0]
            .iter()
            .map(|&t| vec![t; 8])
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let alpha: f64 = cronbach_alpha(&m).unwrap();
        assert!((alpha - 1.0).abs() < 1e-12, "alpha={alpha}");
    }

    #[test]
    fn alpha_two_item_fixture() {
        let m = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![50.0, 50.0],
            vec![100.0, 100.0],
        ])
        .unwrap();
        let alpha: f64 = cronbach_alpha(&m).unwrap();
        assert!((alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_near_zero_for_independent_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(90210);
        let n = 10_000;
        let mut data = Vec::with_capacity(n * 8);
        for _ in 0..n * 8 {
            data.push(rng.gen::<f64>() * 100.0);
        }
        let m = Matrix::from_vec(n, 8, data).unwrap();
        let alpha: f64 = cronbach_alpha(&m).unwrap();
        assert!(alpha.abs() < 0.05, "alpha={alpha}");
    }

    #[test]
    fn alpha_errors() {
        let constant = Matrix::from_rows(&[vec![5.0, 5.0], vec![5.0, 5.0]]).unwrap();
        assert!(matches!(
            cronbach_alpha::<f64>(&constant),
            Err(Error::UndefinedStatistic(_))
        ));
        let one_row = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(cronbach_alpha::<f64>(&one_row).is_err());
        let one_col = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(cronbach_alpha::<f64>(&one_col).is_err());
    }

    #[test]
    fn variability_fixture() {
        let records = vec![
            ema("a", [12.5; 8]), // total 100
            ema("a", [37.5; 8]), // total 300
            ema("b", [10.0; 8]),
            ema("b", [10.0; 8]),
            ema("c", [99.0; 8]), // single session: omitted
        ];
        let summary = intra_individual_variability(&records);
        assert_eq!(summary.per_participant.len(), 2);
        let a = &summary.per_participant[0];
        assert_eq!(a.participant_id, "a");
        assert!((a.std_dev - 141.42135623730951).abs() < 1e-9);
        assert_eq!(summary.per_participant[1].std_dev, 0.0);
        assert_eq!(summary.omitted, vec!["c".to_string()]);
        assert_eq!(summary.min_std, Some(0.0));
        assert!((summary.max_std.unwrap() - 141.42135623730951).abs() < 1e-9);
    }

    #[test]
    fn reliability_report_end_to_end() {
        let records = vec![
            ema("a", [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]),
            ema("a", [5.0, 15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 75.0]),
            ema("b", [80.0, 70.0, 60.0, 50.0, 40.0, 30.0, 20.0, 10.0]),
            ema("b", [90.0, 80.0, 70.0, 60.0, 50.0, 40.0, 30.0, 20.0]),
        ];
        let report = reliability_report(&records).unwrap();
        assert_eq!(report.n_respondents, 4);
        assert_eq!(report.n_items, 8);
        assert!(report.cronbach_alpha <= 1.0);
        assert_eq!(report.variability.per_participant.len(), 2);
    }

    proptest! {
        #[test]
        fn classify_is_monotone(a in 0.0..800.0f64, b in 0.0..800.0f64, t in 0.0..800.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            // If the lower total is Depressed, the higher must be too.
            if classify(lo, t) == PhqClass::Depressed {
                prop_assert_eq!(classify(hi, t), PhqClass::Depressed);
            }
        }

        #[test]
        fn alpha_shift_and_scale_invariant(
            seed in 0u64..1000,
            shift in -50.0..50.0f64,
            scale in 0.1..10.0f64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 30;
            let mut base = Vec::with_capacity(n * 4);
            for _ in 0..n {
                let latent = rng.gen::<f64>() * 100.0;
                for _ in 0..4 {
                    base.push(latent + rng.gen::<f64>() * 10.0);
                }
            }
            let m = Matrix::from_vec(n, 4, base.clone()).unwrap();
            let transformed = Matrix::from_vec(
                n,
                4,
                base.iter().map(|v| (v + shift) * scale).collect(),
            ).unwrap();
            let a0: f64 = cronbach_alpha(&m).unwrap();
            let a1: f64 = cronbach_alpha(&transformed).unwrap();
            prop_assert!((a0 - a1).abs() < 1e-9, "a0={} a1={}", a0, a1);
        }

        #[test]
        fn total_score_permutation_invariant(items in proptest::array::uniform8(0.0..100.0f64), rot in 0usize..8) {
            let mut rotated = items;
            rotated.rotate_left(rot);
            let t0 = total_score(&ema("p", items));
            let t1 = total_score(&ema("p", rotated));
            prop_assert!((t0 - t1).abs() < 1e-9);
        }
    }
}
