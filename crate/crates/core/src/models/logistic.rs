//! L2-regularized logistic regression fit by gradient descent with Armijo
//! backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig<F> {
    /// Ridge strength on the weights; the intercept is never penalized.
    pub l2: F,
    pub max_iter: usize,
    /// Convergence threshold on the gradient max-norm.
    pub tol: F,
}

impl<F: Scalar> Default for LogisticConfig<F> {
    fn default() -> Self {
        Self {
            l2: F::from_f64_lossy(0.01),
            max_iter: 500,
            tol: F::from_f64_lossy(1e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel<F> {
    pub weights: Vec<F>,
    pub intercept: F,
    pub l2: F,
    pub iterations: usize,
    pub final_grad_norm: F,
    pub converged: bool,
}

impl<F: Scalar> LogisticModel<F> {
    pub fn predict_proba(&self, x: &Matrix<F>) -> Result<Vec<F>> {
        if x.n_cols() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.n_cols(),
            });
        }
        Ok(x.rows()
            .map(|row| {
                let z = dot(row, &self.weights) + self.intercept;
                sigmoid(z)
            })
            .collect())
    }
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Numerically stable per-sample negative log-likelihood:
/// `log(1 + exp(z)) - y*z = max(z,0) - y*z + log(1 + exp(-|z|))`.
fn nll_term<F: Scalar>(z: F, y: F) -> F {
    z.max(F::zero()) - y * z + (-z.abs()).exp().ln_1p()
}

/// Mean NLL plus `(l2/2)*||w||^2`.
pub fn loss<F: Scalar>(x: &Matrix<F>, y: &[F], weights: &[F], intercept: F, l2: F) -> F {
    let n = F::from_count(x.n_rows());
    let data_term: F = x
        .rows()
        .zip(y)
        .map(|(row, &yi)| nll_term(dot(row, weights) + intercept, yi))
        .sum::<F>()
        / n;
    let reg: F = weights.iter().map(|&w| w * w).sum::<F>() * l2 / F::from_f64_lossy(2.0);
    data_term + reg
}

/// Analytic gradient of `loss` with respect to (weights, intercept).
pub fn gradient<F: Scalar>(
    x: &Matrix<F>,
    y: &[F],
    weights: &[F],
    intercept: F,
    l2: F,
) -> (Vec<F>, F) {
    let n = x.n_rows();
    let n_f = F::from_count(n);
    let mut grad_w = vec![F::zero(); weights.len()];
    let mut grad_b = F::zero();
    for (row, &yi) in x.rows().zip(y) {
        let residual = sigmoid(dot(row, weights) + intercept) - yi;
        for (g, &xij) in grad_w.iter_mut().zip(row) {
            *g += residual * xij;
        }
        grad_b += residual;
    }
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n_f + l2 * w;
    }
    (grad_w, grad_b / n_f)
}

pub fn fit_logistic<F: Scalar>(
    x: &Matrix<F>,
    y: &[F],
    config: &LogisticConfig<F>,
) -> Result<LogisticModel<F>> {
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::InvalidArgument("fit_logistic: empty input".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit_logistic: input contains non-finite values".into()));
    }
    if y.iter().any(|&v| v != F::zero() && v != F::one()) {
        return Err(Error::InvalidArgument("fit_logistic: labels must be 0 or 1".into()));
    }
    if config.l2 < F::zero() {
        return Err(Error::InvalidArgument("fit_logistic: l2 must be >= 0".into()));
    }

    let p = x.n_cols();
    let mut weights = vec![F::zero(); p];
    let mut intercept = F::zero();
    let mut current_loss = loss(x, y, &weights, intercept, config.l2);
    let armijo = F::from_f64_lossy(1e-4);
    let mut iterations = 0;
    let mut grad_norm = F::infinity();

    for iter in 0..config.max_iter {
        iterations = iter + 1;
        let (grad_w, grad_b) = gradient(x, y, &weights, intercept, config.l2);
        grad_norm = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(F::zero(), |acc, g| acc.max(g.abs()));
        if grad_norm <= config.tol {
            iterations = iter;
            break;
        }
        let grad_sq: F = grad_w.iter().map(|&g| g * g).sum::<F>() + grad_b * grad_b;
        // Backtracking from a unit step until the Armijo decrease holds.
        let mut step = F::one();
        let mut accepted = false;
        for _ in 0..60 {
            let trial_w: Vec<F> = weights
                .iter()
                .zip(&grad_w)
                .map(|(&w, &g)| w - step * g)
                .collect();
            let trial_b = intercept - step * grad_b;
            let trial_loss = loss(x, y, &trial_w, trial_b, config.l2);
            if trial_loss <= current_loss - armijo * step * grad_sq {
                debug_assert!(trial_loss <= current_loss);
                weights = trial_w;
                intercept = trial_b;
                current_loss = trial_loss;
                accepted = true;
                break;
            }
            step = step / F::from_f64_lossy(2.0);
        }
        if !accepted {
            // Step underflowed: we are at numerical precision, stop here.
            break;
        }
    }

    Ok(LogisticModel {
        weights,
        intercept,
        l2: config.l2,
        iterations,
        final_grad_norm: grad_norm,
        converged: grad_norm <= config.tol,
    })
}
