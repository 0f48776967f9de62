//! Ranked feature-importance reports over a batch of attributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::treeshap::Attribution;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub name: String,
    /// Mean |phi| over the explained samples.
    pub score: f64,
    /// Pearson correlation between the feature's values and its phi values;
    /// None when either side is constant.
    pub value_phi_correlation: Option<f64>,
    /// Sign of the correlation: +1 higher values push the prediction up,
    /// -1 down, 0 unknown/flat.
    pub direction: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub entries: Vec<RankedFeature>,
    pub requested_k: usize,
    /// True when k exceeded the feature count and was clamped.
    pub clamped: bool,
    /// True when every attribution was zero: the ranking is then just
    /// registry order and carries no information.
    pub degenerate: bool,
    pub n_samples: usize,
}

fn correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Rank features by mean |phi| over the explained split, with a value-vs-phi
/// direction summary per feature. Ties and the degenerate all-zero case fall
/// back to registry order.
pub fn top_k_report<F: Scalar>(
    attributions: &[Attribution<F>],
    x: &Matrix<F>,
    feature_names: &[String],
    k: usize,
) -> Result<ImportanceReport> {
    if attributions.is_empty() {
        return Err(Error::InvalidArgument("top_k_report: no attributions".into()));
    }
    let p = feature_names.len();
    if x.n_rows() != attributions.len() || x.n_cols() != p {
        return Err(Error::DimensionMismatch { expected: attributions.len() * p, got: x.n_rows() * x.n_cols() });
    }
    for a in attributions {
        if a.phi.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: a.phi.len() });
        }
    }
    let n = attributions.len();
    let clamped = k > p;
    let k_eff = k.min(p).max(1);

    let mut mean_abs = vec![0.0f64; p];
    for a in attributions {
        for (slot, &phi) in mean_abs.iter_mut().zip(&a.phi) {
            *slot += phi.abs().to_f64_lossy();
        }
    }
    for slot in mean_abs.iter_mut() {
        *slot /= n as f64;
    }
    let degenerate = mean_abs.iter().all(|&s| s == 0.0);

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        mean_abs[b]
            .partial_cmp(&mean_abs[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let entries = order[..k_eff]
        .iter()
        .map(|&j| {
            let values: Vec<f64> = x.column(j).iter().map(|v| v.to_f64_lossy()).collect();
            let phis: Vec<f64> = attributions
                .iter()
                .map(|a| a.phi[j].to_f64_lossy())
                .collect();
            let corr = correlation(&values, &phis);
            RankedFeature {
                index: j,
                name: feature_names[j].clone(),
                score: mean_abs[j],
                value_phi_correlation: corr,
                direction: match corr {
                    Some(c) if c > 0.0 => 1,
                    Some(c) if c < 0.0 => -1,
                    _ => 0,
                },
            }
        })
        .collect();

    Ok(ImportanceReport {
        entries,
        requested_k: k,
        clamped,
        degenerate,
        n_samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attribution(phi: Vec<f64>) -> Attribution<f64> {
        Attribution { base_value: 0.0, phi, prediction: 0.0 }
    }

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn ranks_by_mean_abs_phi() {
        let attributions = vec![
            attribution(vec![0.1, -2.0, 0.5]),
            attribution(vec![-0.3, 1.0, 0.5]),
        ];
        let x = Matrix::from_rows(&[vec![1.0, 5.0, 2.0], vec![2.0, -5.0, 3.0]]).unwrap();
        let report = top_k_report(&attributions, &x, &names(3), 2).unwrap();
        assert_eq!(report.entries.len(), 2);
        assert_eq!(report.entries[0].name, "f1"); // mean |phi| = 1.5
        assert_eq!(report.entries[1].name, "f2"); // 0.5
        assert!(!report.degenerate);
        assert!(!report.clamped);
    }

    #[test]
    fn direction_reflects_value_phi_correlation() {
        // Feature 0: higher value -> higher phi (positive direction).
        let attributions = vec![
            attribution(vec![-1.0]),
            attribution(vec![0.0]),
            attribution(vec![1.0]),
        ];
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let report = top_k_report(&attributions, &x, &names(1), 1).unwrap();
        assert_eq!(report.entries[0].direction, 1);
        assert!(report.entries[0].value_phi_correlation.unwrap() > 0.99);
    }

    #[test]
    fn degenerate_all_zero_flags_and_uses_registry_order() {
        let attributions = vec![attribution(vec![0.0, 0.0, 0.0])];
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let report = top_k_report(&attributions, &x, &names(3), 3).unwrap();
        assert!(report.degenerate);
        let order: Vec<usize> = report.entries.iter().map(|e| e.index).collect();
        assert_eq!(order, vec![0, 1, 2]);
        // Constant columns (single sample) have no defined correlation.
        assert_eq!(report.entries[0].direction, 0);
    }

    #[test]
    fn k_larger_than_feature_count_is_clamped() {
        let attributions = vec![attribution(vec![1.0, 2.0])];
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let report = top_k_report(&attributions, &x, &names(2), 10).unwrap();
        assert!(report.clamped);
        assert_eq!(report.entries.len(), 2);
        assert_eq!(report.requested_k, 10);
    }

    #[test]
    fn empty_attributions_error() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(top_k_report::<f64>(&[], &x, &names(1), 1).is_err());
    }
}
