//! Fraction-based feature selection over MI scores, plus feature-group
//! projections of a dataset.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::mi::FeatureScore;
use crate::registry::{FeatureRegistry, FeatureSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Keep features with the smallest mean pairwise MI ("most independent").
    Independence,
    /// Keep features with the largest MI with the label.
    Relevance,
}

impl SelectionMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "independence" => Ok(SelectionMode::Independence),
            "relevance" => Ok(SelectionMode::Relevance),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection mode '{other}' (expected independence|relevance)"
            ))),
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            SelectionMode::Independence => "independence",
            SelectionMode::Relevance => "relevance",
        }
    }
}

impl Default for SelectionMode {
    fn default() -> Self {
        SelectionMode::Independence
    }
}

/// Keep `ceil(fraction * n)` features. Ties break toward the earlier
/// registry index, and the returned indices are in registry order.
pub fn select_fraction(
    scores: &[FeatureScore],
    fraction: f64,
    mode: SelectionMode,
) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("select_fraction: no scores".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "select_fraction: fraction {fraction} outside (0,1]"
        )));
    }
    let n = scores.len();
    let keep = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    match mode {
        SelectionMode::Independence => order.sort_by(|&a, &b| {
            scores[a]
                .mean_pairwise_mi
                .partial_cmp(&scores[b].mean_pairwise_mi)
                .unwrap()
                .then(scores[a].index.cmp(&scores[b].index))
        }),
        SelectionMode::Relevance => order.sort_by(|&a, &b| {
            scores[b]
                .mi_with_label
                .partial_cmp(&scores[a].mi_with_label)
                .unwrap()
                .then(scores[a].index.cmp(&scores[b].index))
        }),
    }
    let mut selected: Vec<usize> = order[..keep].iter().map(|&i| scores[i].index).collect();
    selected.sort_unstable();
    Ok(selected)
}

/// Project a full-registry dataset down to one feature group.
pub fn select_group(
    dataset: &Dataset,
    registry: &FeatureRegistry,
    set: FeatureSet,
) -> Result<Dataset> {
    if dataset.n_features() != registry.len() {
        return Err(Error::DimensionMismatch {
            expected: registry.len(),
            got: dataset.n_features(),
        });
    }
    dataset.project_features(&registry.group_indices(set))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn score(index: usize, with_label: f64, pairwise: f64) -> FeatureScore {
        FeatureScore {
            index,
            name: format!("f{index}"),
            mi_with_label: with_label,
            mean_pairwise_mi: pairwise,
        }
    }

    #[test]
    fn full_fraction_keeps_everything() {
        let scores: Vec<FeatureScore> =
            (0..709).map(|i| score(i, i as f64, (709 - i) as f64)).collect();
        for mode in [SelectionMode::Independence, SelectionMode::Relevance] {
            let kept = select_fraction(&scores, 1.0, mode).unwrap();
            assert_eq!(kept.len(), 709);
            assert_eq!(kept, (0..709).collect::<Vec<_>>());
        }
    }

    #[test]
    fn independence_keeps_smallest_pairwise() {
        let scores = vec![
            score(0, 9.0, 0.1),
            score(1, 9.0, 0.2),
            score(2, 9.0, 0.3),
            score(3, 9.0, 0.4),
        ];
        let kept = select_fraction(&scores, 0.5, SelectionMode::Independence).unwrap();
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn relevance_keeps_largest_label_mi() {
        let scores = vec![
            score(0, 0.1, 0.0),
            score(1, 0.4, 0.0),
            score(2, 0.3, 0.0),
            score(3, 0.2, 0.0),
        ];
        let kept = select_fraction(&scores, 0.5, SelectionMode::Relevance).unwrap();
        assert_eq!(kept, vec![1, 2]);
    }

    #[test]
    fn ties_break_toward_earlier_registry_index() {
        let scores = vec![score(0, 0.5, 0.5), score(1, 0.5, 0.5), score(2, 0.5, 0.5)];
        assert_eq!(
            select_fraction(&scores, 0.3, SelectionMode::Independence).unwrap(),
            vec![0]
        );
        assert_eq!(
            select_fraction(&scores, 0.3, SelectionMode::Relevance).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn fraction_validation() {
        let scores = vec![score(0, 0.0, 0.0)];
        assert!(select_fraction(&[], 0.5, SelectionMode::Independence).is_err());
        assert!(select_fraction(&scores, 0.0, SelectionMode::Independence).is_err());
        assert!(select_fraction(&scores, 1.5, SelectionMode::Independence).is_err());
    }

    proptest! {
        #[test]
        fn output_size_is_ceil_fraction_n(
            n in 1usize..300,
            fraction in prop::sample::select(vec![0.25, 0.5, 1.0]),
        ) {
            let scores: Vec<FeatureScore> = (0..n).map(|i| score(i, i as f64 * 0.01, 1.0 - i as f64 * 0.001)).collect();
            let kept = select_fraction(&scores, fraction, SelectionMode::Independence).unwrap();
            prop_assert_eq!(kept.len(), (fraction * n as f64).ceil() as usize);
            // Indices are unique, sorted, and within range.
            prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(kept.iter().all(|&i| i < n));
        }
    }
}
