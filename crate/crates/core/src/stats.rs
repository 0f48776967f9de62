//! Small shared statistics helpers.

use crate::scalar::Scalar;

pub fn mean<F: Scalar>(xs: &[F]) -> F {
    if xs.is_empty() {
        return F::nan();
    }
    xs.iter().copied().sum::<F>() / F::from_count(xs.len())
}

/// Sample variance (n-1 denominator). NaN for fewer than two values.
pub fn sample_variance<F: Scalar>(xs: &[F]) -> F {
    if xs.len() < 2 {
        return F::nan();
    }
    let m = mean(xs);
    let ss = xs.iter().map(|&x| (x - m) * (x - m)).sum::<F>();
    ss / F::from_count(xs.len() - 1)
}

pub fn sample_std<F: Scalar>(xs: &[F]) -> F {
    sample_variance(xs).sqrt()
}
