//! Plug-in mutual information on equal-frequency bins (nats).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Equal-frequency discretization. Bin edges sit at sorted-order quantile
/// positions, and assignment is by value, so tied values always share a bin
/// and the result is invariant to input permutation.
pub fn equal_frequency_bins<F: Scalar>(values: &[F], bins: usize) -> Result<Vec<u32>> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "equal_frequency_bins: bins must be >=2, got {bins}"
        )));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "equal_frequency_bins: empty input".into(),
        ));
    }
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in binning"));
    // Upper boundary of bin k (inclusive): the last value that belongs to it
    // under an even split of the sorted order.
    let mut edges = Vec::with_capacity(bins - 1);
    for k in 0..bins - 1 {
        let pos = ((k + 1) * n).div_ceil(bins) - 1;
        edges.push(sorted[pos]);
    }
    Ok(values
        .iter()
        .map(|v| edges.iter().take_while(|e| v > *e).count() as u32)
        .collect())
}

/// Quartile binning for continuous labels.
pub fn quartile_bin_labels<F: Scalar>(labels: &[F]) -> Result<Vec<u32>> {
    equal_frequency_bins(labels, 4)
}

/// Plug-in MI between two pre-binned sequences:
/// `sum over cells of p(x,y) * ln(p(x,y) / (p(x) p(y)))`.
pub fn mutual_information(x_bins: &[u32], y_bins: &[u32]) -> Result<f64> {
    if x_bins.len() != y_bins.len() {
        return Err(Error::DimensionMismatch {
            expected: x_bins.len(),
            got: y_bins.len(),
        });
    }
    if x_bins.is_empty() {
        return Err(Error::InvalidArgument("mutual_information: empty input".into()));
    }
    let bx = *x_bins.iter().max().unwrap() as usize + 1;
    let by = *y_bins.iter().max().unwrap() as usize + 1;
    let mut joint = vec![0u64; bx * by];
    let mut mx = vec![0u64; bx];
    let mut my = vec![0u64; by];
    for (&x, &y) in x_bins.iter().zip(y_bins) {
        joint[x as usize * by + y as usize] += 1;
        mx[x as usize] += 1;
        my[y as usize] += 1;
    }
    let n = x_bins.len() as f64;
    let mut mi = 0.0;
    for x in 0..bx {
        for y in 0..by {
            let c = joint[x * by + y];
            if c == 0 {
                continue;
            }
            let p_xy = c as f64 / n;
            let p_x = mx[x] as f64 / n;
            let p_y = my[y] as f64 / n;
            mi += p_xy * (p_xy / (p_x * p_y)).ln();
        }
    }
    // Exact-arithmetic MI is nonnegative; trim float dust.
    Ok(mi.max(0.0))
}

/// Per-feature MI against the label and mean pairwise MI against all other
/// features, computed on the training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub index: usize,
    pub name: String,
    pub mi_with_label: f64,
    pub mean_pairwise_mi: f64,
}

pub fn mi_scores<F: Scalar>(
    train: &Matrix<F>,
    label_bins: &[u32],
    feature_names: &[String],
    bins: usize,
) -> Result<Vec<FeatureScore>> {
    mi_scores_opts(train, label_bins, feature_names, bins, true)
}

/// Like [`mi_scores`], but the O(p²·n) pairwise table is optional. With
/// `pairwise = false` every `mean_pairwise_mi` is 0.0 — only callers that
/// rank by label MI alone should skip it.
pub fn mi_scores_opts<F: Scalar>(
    train: &Matrix<F>,
    label_bins: &[u32],
    feature_names: &[String],
    bins: usize,
    pairwise: bool,
) -> Result<Vec<FeatureScore>> {
    let (n, p) = (train.n_rows(), train.n_cols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "mi_scores: need >=2 samples, got {n}"
        )));
    }
    if label_bins.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: label_bins.len() });
    }
    if feature_names.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: feature_names.len() });
    }
    let binned: Vec<Vec<u32>> = (0..p)
        .into_par_iter()
        .map(|j| equal_frequency_bins(&train.column(j), bins))
        .collect::<Result<_>>()?;
    let with_label: Vec<f64> = binned
        .par_iter()
        .map(|b| mutual_information(b, label_bins))
        .collect::<Result<_>>()?;

    // Upper-triangle pairs evaluated into a flat, index-ordered buffer, then
    // reduced sequentially: the result is identical for any thread count.
    let mut sums = vec![0.0f64; p];
    if pairwise {
        let pairs: Vec<(usize, usize)> = (0..p)
            .flat_map(|j| ((j + 1)..p).map(move |k| (j, k)))
            .collect();
        let pair_mi: Vec<f64> = pairs
            .par_iter()
            .map(|&(j, k)| mutual_information(&binned[j], &binned[k]))
            .collect::<Result<_>>()?;
        for (&(j, k), &v) in pairs.iter().zip(&pair_mi) {
            sums[j] += v;
            sums[k] += v;
        }
    }
    Ok((0..p)
        .map(|j| FeatureScore {
            index: j,
            name: feature_names[j].clone(),
            mi_with_label: with_label[j],
            mean_pairwise_mi: if p > 1 { sums[j] / (p - 1) as f64 } else { 0.0 },
        })
        .collect())
}
