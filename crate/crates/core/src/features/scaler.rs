//! Train-split standardization. Parameters are estimated once on training
//! rows and applied verbatim everywhere else — never re-fit on evaluation
//! data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::stats::{mean, sample_std};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams<F> {
    pub means: Vec<F>,
    pub stds: Vec<F>,
    /// Columns with zero training variance; they pass through unscaled.
    pub constant: Vec<bool>,
}

impl<F: Scalar> ScalerParams<F> {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn n_constant(&self) -> usize {
        self.constant.iter().filter(|&&c| c).count()
    }
}

pub fn fit_scaler<F: Scalar>(train: &Matrix<F>) -> Result<ScalerParams<F>> {
    if train.n_rows() == 0 {
        return Err(Error::InvalidArgument("fit_scaler: empty split".into()));
    }
    let mut means = Vec::with_capacity(train.n_cols());
    let mut stds = Vec::with_capacity(train.n_cols());
    let mut constant = Vec::with_capacity(train.n_cols());
    for j in 0..train.n_cols() {
        let col = train.column(j);
        let m = mean(&col);
        let s = if col.len() < 2 { F::zero() } else { sample_std(&col) };
        let is_constant = !(s > F::zero());
        means.push(m);
        stds.push(if is_constant { F::one() } else { s });
        constant.push(is_constant);
    }
    Ok(ScalerParams { means, stds, constant })
}

pub fn apply_scaler<F: Scalar>(params: &ScalerParams<F>, split: &Matrix<F>) -> Result<Matrix<F>> {
    if split.n_cols() != params.n_features() {
        return Err(Error::DimensionMismatch {
            expected: params.n_features(),
            got: split.n_cols(),
        });
    }
    let mut out = split.clone();
    let n_cols = out.n_cols();
    for row in 0..out.n_rows() {
        for col in 0..n_cols {
            if params.constant[col] {
                continue;
            }
            let v = (out.get(row, col) - params.means[col]) / params.stds[col];
            out.set(row, col, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_application_centers_and_scales() {
        let x = Matrix::from_rows(&[
            vec![1.0, 10.0, 5.0],
            vec![2.0, 20.0, 5.0],
            vec![3.0, 30.0, 5.0],
            vec![4.0, 40.0, 5.0],
        ])
        .unwrap();
        let params = fit_scaler(&x).unwrap();
        assert_eq!(params.constant, vec![false, false, true]);
        let z = apply_scaler(&params, &x).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = z.column(j);
            assert!(mean(&col).abs() < 1e-9);
            assert!((sample_std(&col) - 1.0).abs() < 1e-9);
        }
        // Constant column untouched.
        assert_eq!(z.column(2), vec![5.0; 4]);
    }

    #[test]
    fn unseen_split_uses_training_stats() {
        let train = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap(); // mean 1, std sqrt(2)
        let test = Matrix::from_rows(&[vec![10.0], vec![20.0]]).unwrap();
        let params = fit_scaler(&train).unwrap();
        let z = apply_scaler(&params, &test).unwrap();
        // Scaled by train stats, not test's own z-scores (which would be ±0.707..).
        let expected = (10.0 - 1.0) / 2.0f64.sqrt();
        assert!((z.get(0, 0) - expected).abs() < 1e-12);
        assert!(z.get(0, 0).abs() > 2.0);
    }

    #[test]
    fn errors() {
        let empty: Matrix<f64> = Matrix::zeros(0, 3);
        assert!(fit_scaler(&empty).is_err());
        let train = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let params = fit_scaler(&train).unwrap();
        let wrong = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(apply_scaler(&params, &wrong).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let x: Matrix<f32> = Matrix::from_rows(&[vec![1.0f32, 4.0], vec![3.0, 8.0]]).unwrap();
        let params = fit_scaler(&x).unwrap();
        let z = apply_scaler(&params, &x).unwrap();
        assert!((z.get(0, 0) + core::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }
}
