//! Elastic net regression via cyclic coordinate descent with
//! soft-thresholding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::stats::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetConfig<F> {
    /// Overall penalty strength.
    pub lambda: F,
    /// L1 share of the penalty: 1 = lasso, 0 = ridge.
    pub alpha_mix: F,
    pub max_sweeps: usize,
    /// Convergence threshold on the max coefficient change per sweep.
    pub tol: F,
}

impl<F: Scalar> Default for ElasticNetConfig<F> {
    fn default() -> Self {
        Self {
            lambda: F::from_f64_lossy(0.01),
            alpha_mix: F::from_f64_lossy(0.5),
            max_sweeps: 1000,
            tol: F::from_f64_lossy(1e-8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel<F> {
    pub coefficients: Vec<F>,
    pub intercept: F,
    pub lambda: F,
    pub alpha_mix: F,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective value at the end of each sweep; non-increasing.
    pub objective_trace: Vec<F>,
}

impl<F: Scalar> ElasticNetModel<F> {
    pub fn predict(&self, x: &Matrix<F>) -> Result<Vec<F>> {
        if x.n_cols() != self.coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coefficients.len(),
                got: x.n_cols(),
            });
        }
        Ok(x.rows()
            .map(|row| {
                row.iter()
                    .zip(&self.coefficients)
                    .map(|(&xi, &b)| xi * b)
                    .sum::<F>()
                    + self.intercept
            })
            .collect())
    }
}

fn soft_threshold<F: Scalar>(rho: F, threshold: F) -> F {
    if rho > threshold {
        rho - threshold
    } else if rho < -threshold {
        rho + threshold
    } else {
        F::zero()
    }
}

/// `(1/2n)||y - Xb - b0||^2 + lambda*(alpha*||b||_1 + (1-alpha)/2*||b||^2)`
/// evaluated on centered data (intercept folded out).
fn objective<F: Scalar>(residual: &[F], beta: &[F], lambda: F, alpha: F) -> F {
    let n = F::from_count(residual.len());
    let l1: F = beta.iter().map(|b| b.abs()).sum();
    let l2: F = beta.iter().map(|&b| b * b).sum();
    let sse: F = residual.iter().map(|&r| r * r).sum();
    sse / (F::from_f64_lossy(2.0) * n)
        + lambda * (alpha * l1 + (F::one() - alpha) / F::from_f64_lossy(2.0) * l2)
}

pub fn fit_elastic_net<F: Scalar>(
    x: &Matrix<F>,
    y: &[F],
    config: &ElasticNetConfig<F>,
) -> Result<ElasticNetModel<F>> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument("fit_elastic_net: empty input".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(
            "fit_elastic_net: input contains non-finite values".into(),
        ));
    }
    if config.lambda < F::zero() {
        return Err(Error::InvalidArgument("fit_elastic_net: lambda must be >= 0".into()));
    }
    if config.alpha_mix < F::zero() || config.alpha_mix > F::one() {
        return Err(Error::InvalidArgument(
            "fit_elastic_net: alpha_mix must be in [0,1]".into(),
        ));
    }

    let n_f = F::from_count(n);
    // Center columns and the target; the intercept is recovered at the end.
    let col_means: Vec<F> = (0..p).map(|j| mean(&x.column(j))).collect();
    let y_mean = mean(y);
    let mut xc = x.clone();
    for i in 0..n {
        for j in 0..p {
            let v = xc.get(i, j) - col_means[j];
            xc.set(i, j, v);
        }
    }
    // z_j = (1/n) x_j . x_j on centered columns.
    let z: Vec<F> = (0..p)
        .map(|j| xc.column(j).iter().map(|&v| v * v).sum::<F>() / n_f)
        .collect();

    let mut beta = vec![F::zero(); p];
    let mut residual: Vec<F> = y.iter().map(|&yi| yi - y_mean).collect();
    let l1_pen = config.lambda * config.alpha_mix;
    let l2_pen = config.lambda * (F::one() - config.alpha_mix);

    let mut objective_trace = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;
    let mut last_objective = F::infinity();
    for sweep in 0..config.max_sweeps {
        sweeps = sweep + 1;
        let mut max_delta = F::zero();
        for j in 0..p {
            let denom = z[j] + l2_pen;
            if denom <= F::zero() {
                // Constant column: no signal, coefficient pinned at zero.
                beta[j] = F::zero();
                continue;
            }
            let old = beta[j];
            // rho_j = (1/n) x_j . (residual + x_j * beta_j)
            let mut rho = F::zero();
            for i in 0..n {
                rho += xc.get(i, j) * residual[i];
            }
            rho = rho / n_f + z[j] * old;
            let new = soft_threshold(rho, l1_pen) / denom;
            if new != old {
                let delta = old - new;
                for i in 0..n {
                    let r = residual[i] + xc.get(i, j) * delta;
                    residual[i] = r;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        let obj = objective(&residual, &beta, config.lambda, config.alpha_mix);
        debug_assert!(
            obj <= last_objective + F::from_f64_lossy(1e-10),
            "objective rose within coordinate descent"
        );
        last_objective = obj;
        objective_trace.push(obj);
        if max_delta <= config.tol {
            converged = true;
            break;
        }
    }

    let intercept = y_mean
        - col_means
            .iter()
            .zip(&beta)
            .map(|(&m, &b)| m * b)
            .sum::<F>();
    Ok(ElasticNetModel {
        coefficients: beta,
        intercept,
        lambda: config.lambda,
        alpha_mix: config.alpha_mix,
        sweeps,
        converged,
        objective_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fit(x: &Matrix<f64>, y: &[f64], lambda: f64, alpha: f64) -> ElasticNetModel<f64> {
        fit_elastic_net(
            x,
            y,
            &ElasticNetConfig {
                lambda,
                alpha_mix: alpha,
                max_sweeps: 5000,
                tol: 1e-12,
            },
        )
        .unwrap()
    }

    #[test]
    fn exact_linear_fit_at_lambda_zero() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = vec![2.0, 4.0, 6.0];
        let model = fit(&x, &y, 0.0, 0.5);
        assert!((model.coefficients[0] - 2.0).abs() < 1e-8);
        assert!(model.intercept.abs() < 1e-8);
        let pred = model.predict(&x).unwrap();
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-8);
        }
    }

    #[test]
    fn lasso_on_orthonormal_design_matches_soft_threshold() {
        // Columns scaled so (1/n) x_j . x_j = 1 and columns are orthogonal:
        // coordinate descent then solves each coordinate exactly in one pass,
        // beta_j = S(ols_j, lambda).
        let n = 8;
        let mut data = vec![0.0; n * 2];
        for i in 0..n {
            let s1 = if i % 2 == 0 { 1.0 } else { -1.0 };
            let s2 = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            data[i * 2] = s1;
            data[i * 2 + 1] = s2;
        }
        let x = Matrix::from_vec(n, 2, data).unwrap();
        // Sanity: centered columns already (each pattern sums to zero).
        let ols = [0.9, -0.3]; // construct y = X * ols exactly
        let y: Vec<f64> = (0..n)
            .map(|i| x.get(i, 0) * ols[0] + x.get(i, 1) * ols[1])
            .collect();
        for lambda in [0.0, 0.1, 0.5, 1.0] {
            let model = fit(&x, &y, lambda, 1.0);
            for (j, &b_ols) in ols.iter().enumerate() {
                let expected = b_ols.signum() * (b_ols.abs() - lambda).max(0.0);
                assert!(
                    (model.coefficients[j] - expected).abs() < 1e-8,
                    "lambda={lambda} j={j}: got {} want {expected}",
                    model.coefficients[j]
                );
            }
        }
    }

    #[test]
    fn huge_lambda_shrinks_everything_to_intercept() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0], vec![4.0, 0.5], vec![2.0, 9.0]]).unwrap();
        let y = vec![10.0, 30.0, 20.0];
        let model = fit(&x, &y, 1e9, 0.5);
        assert!(model.coefficients.iter().all(|&b| b == 0.0));
        assert!((model.intercept - 20.0).abs() < 1e-9);
        let pred = model.predict(&x).unwrap();
        assert!(pred.iter().all(|&p| (p - 20.0).abs() < 1e-9));
    }

    #[test]
    fn matches_closed_form_least_squares_at_lambda_zero() {
        // 2x2 normal equations solved by hand for random well-conditioned
        // systems; CD with lambda=0 must agree.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let n = 12;
            let mut data = Vec::with_capacity(n * 2);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let a = rng.gen::<f64>() * 4.0 - 2.0;
                let b = rng.gen::<f64>() * 4.0 - 2.0;
                data.push(a);
                data.push(b);
                y.push(1.5 * a - 0.7 * b + 0.3 + (rng.gen::<f64>() - 0.5) * 0.01);
            }
            let x = Matrix::from_vec(n, 2, data).unwrap();
            // Closed form on centered data.
            let m0 = mean(&x.column(0));
            let m1 = mean(&x.column(1));
            let my = mean(&y);
            let (mut s00, mut s01, mut s11, mut s0y, mut s1y) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                let a = x.get(i, 0) - m0;
                let b = x.get(i, 1) - m1;
                let yy = y[i] - my;
                s00 += a * a;
                s01 += a * b;
                s11 += b * b;
                s0y += a * yy;
                s1y += b * yy;
            }
            let det = s00 * s11 - s01 * s01;
            let beta0 = (s11 * s0y - s01 * s1y) / det;
            let beta1 = (s00 * s1y - s01 * s0y) / det;
            let model = fit(&x, &y, 0.0, 0.5);
            assert!((model.coefficients[0] - beta0).abs() < 1e-6);
            assert!((model.coefficients[1] - beta1).abs() < 1e-6);
            assert!((model.intercept - (my - beta0 * m0 - beta1 * m1)).abs() < 1e-6);
        }
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 50;
        let p = 8;
        let mut data = Vec::with_capacity(n * p);
        for _ in 0..n * p {
            data.push(rng.gen::<f64>() * 2.0 - 1.0);
        }
        let x = Matrix::from_vec(n, p, data).unwrap();
        let y: Vec<f64> = (0..n).map(|i| x.get(i, 0) * 3.0 - x.get(i, 3) + 0.1).collect();
        let model = fit(&x, &y, 0.05, 0.7);
        for w in model.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(model.converged);
    }

    #[test]
    fn constant_column_gets_zero_coefficient() {
        let x = Matrix::from_rows(&[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]]).unwrap();
        let y = vec![1.0, 2.0, 3.0];
        let model = fit(&x, &y, 0.0, 1.0);
        assert_eq!(model.coefficients[0], 0.0);
        assert!((model.coefficients[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn input_validation() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(fit_elastic_net(&x, &[1.0, 2.0], &ElasticNetConfig::default()).is_err());
        let bad_cfg = ElasticNetConfig {
            lambda: -1.0,
            ..ElasticNetConfig::default()
        };
        assert!(fit_elastic_net(&x, &[1.0], &bad_cfg).is_err());
        let bad_mix = ElasticNetConfig {
            alpha_mix: 1.5,
            ..ElasticNetConfig::default()
        };
        assert!(fit_elastic_net(&x, &[1.0], &bad_mix).is_err());
        let nan = Matrix::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(fit_elastic_net(&nan, &[1.0], &ElasticNetConfig::default()).is_err());
    }
}
