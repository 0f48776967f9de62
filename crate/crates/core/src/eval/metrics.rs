//! Classification and regression metrics: balanced accuracy, Matthews
//! correlation, mean absolute error, and R².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn from_labels(y_true: &[bool], y_pred: &[bool]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::DimensionMismatch {
                expected: y_true.len(),
                got: y_pred.len(),
            });
        }
        let mut cm = ConfusionMatrix::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t, p) {
                (true, true) => cm.tp += 1,
                (false, false) => cm.tn += 1,
                (false, true) => cm.fp += 1,
                (true, false) => cm.fn_ += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Mean of sensitivity and specificity.
///
/// Undefined when either class is absent from the ground truth; that is
/// reported as an error so callers mark the metric missing instead of
/// silently scoring zero.
pub fn balanced_accuracy<F: Scalar>(cm: &ConfusionMatrix) -> Result<F> {
    let pos = cm.tp + cm.fn_;
    let neg = cm.tn + cm.fp;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedStatistic(format!(
            "balanced accuracy needs both classes in the ground truth (positives={pos}, negatives={neg})"
        )));
    }
    let sens = F::from_count(cm.tp as usize) / F::from_count(pos as usize);
    let spec = F::from_count(cm.tn as usize) / F::from_count(neg as usize);
    Ok((sens + spec) / F::from_count(2))
}

/// Matthews correlation with its zero-denominator convention spelled out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MccOutcome<F> {
    pub value: F,
    /// True when a denominator factor was zero and the value is 0 by
    /// convention rather than by computation.
    pub zero_denominator: bool,
}

pub fn mcc<F: Scalar>(cm: &ConfusionMatrix) -> MccOutcome<F> {
    let tp = cm.tp as f64;
    let tn = cm.tn as f64;
    let fp = cm.fp as f64;
    let fn_ = cm.fn_ as f64;
    let denom_sq = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom_sq == 0.0 {
        return MccOutcome {
            value: F::zero(),
            zero_denominator: true,
        };
    }
    let value = (tp * tn - fp * fn_) / denom_sq.sqrt();
    MccOutcome {
        value: F::from_f64_lossy(value),
        zero_denominator: false,
    }
}

/// Mean absolute error.
pub fn mae<F: Scalar>(y_true: &[F], y_pred: &[F]) -> Result<F> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("mae over zero samples".into()));
    }
    let total = y_true
        .iter()
        .zip(y_pred)
        .map(|(&t, &p)| (t - p).abs())
        .sum::<F>();
    Ok(total / F::from_count(y_true.len()))
}

/// Coefficient of determination, `1 - SS_res / SS_tot`.
pub fn r_squared<F: Scalar>(y_true: &[F], y_pred: &[F]) -> Result<F> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(Error::InvalidArgument("r_squared needs >= 2 samples".into()));
    }
    let y_mean = stats::mean(y_true);
    let ss_tot = y_true.iter().map(|&y| (y - y_mean) * (y - y_mean)).sum::<F>();
    if ss_tot == F::zero() {
        return Err(Error::UndefinedStatistic(
            "r_squared undefined: ground truth has zero variance".into(),
        ));
    }
    let ss_res = y_true
        .iter()
        .zip(y_pred)
        .map(|(&y, &p)| (y - p) * (y - p))
        .sum::<F>();
    Ok(F::one() - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn balanced_accuracy_perfect() {
        let cm = ConfusionMatrix::new(50, 50, 0, 0);
        assert_eq!(balanced_accuracy::<f64>(&cm).unwrap(), 1.0);
    }

    #[test]
    fn balanced_accuracy_direct_formula() {
        // (TP=40, FN=10, TN=30, FP=20): (0.8 + 0.6) / 2.
        let cm = ConfusionMatrix::new(40, 30, 20, 10);
        assert!((balanced_accuracy::<f64>(&cm).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn balanced_accuracy_missing_class_is_undefined() {
        let cm = ConfusionMatrix::new(10, 0, 0, 5);
        assert!(matches!(
            balanced_accuracy::<f64>(&cm),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn coin_predictions_on_balanced_labels_sit_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let y_true: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let y_pred: Vec<bool> = (0..n).map(|_| rng.gen::<bool>()).collect();
        let cm = ConfusionMatrix::from_labels(&y_true, &y_pred).unwrap();
        let ba: f64 = balanced_accuracy(&cm).unwrap();
        assert!((ba - 0.5).abs() < 0.02, "ba = {ba}");
    }

    #[test]
    fn mcc_perfect_and_degenerate() {
        let perfect = mcc::<f64>(&ConfusionMatrix::new(50, 50, 0, 0));
        assert_eq!(perfect.value, 1.0);
        assert!(!perfect.zero_denominator);

        // One-class truth and prediction: (TN+FP) = 0 factor.
        let degenerate = mcc::<f64>(&ConfusionMatrix::new(60, 0, 0, 40));
        assert_eq!(degenerate.value, 0.0);
        assert!(degenerate.zero_denominator);
    }

    #[test]
    fn mcc_direct_formula() {
        // 1000 / sqrt(60 * 50 * 50 * 40)
        let out = mcc::<f64>(&ConfusionMatrix::new(40, 30, 20, 10));
        let expected = 1000.0 / (60.0_f64 * 50.0 * 50.0 * 40.0).sqrt();
        assert!((out.value - expected).abs() < 1e-15);
        assert!((out.value - 0.408).abs() < 5e-4);
    }

    #[test]
    fn mcc_sign_flips_when_predictions_negate() {
        let cm = ConfusionMatrix::new(40, 30, 20, 10);
        let flipped = ConfusionMatrix::new(10, 20, 30, 40);
        let a = mcc::<f64>(&cm).value;
        let b = mcc::<f64>(&flipped).value;
        assert!((a + b).abs() < 1e-12);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let v = mae(&[334.0, 100.0], &[234.0, 200.0]).unwrap();
        assert_eq!(v, 100.0);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mae_of_mean_predictor_on_uniform_labels() {
        // E|U(0,800) - 400| = 200.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..100_000).map(|_| rng.gen_range(0.0..800.0)).collect();
        let pred = vec![400.0; y.len()];
        let v = mae(&y, &pred).unwrap();
        assert!((v - 200.0).abs() < 2.0, "mae = {v}");
    }

    #[test]
    fn mae_translation_invariance() {
        let y = [10.0, 40.0, 90.0];
        let p = [12.0, 35.0, 100.0];
        let shifted_y: Vec<f64> = y.iter().map(|v| v + 123.0).collect();
        let shifted_p: Vec<f64> = p.iter().map(|v| v + 123.0).collect();
        let a = mae(&y, &p).unwrap();
        let b = mae(&shifted_y, &shifted_p).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn r_squared_examples() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        let mean_pred = [2.0, 2.0, 2.0];
        assert_eq!(r_squared(&y, &mean_pred).unwrap(), 0.0);
        // Mirror about the mean: residuals are 2x deviations, R^2 = -3.
        let mirror = [3.0, 2.0, 1.0];
        let v: f64 = r_squared(&y, &mirror).unwrap();
        assert!(v <= -1.0);
        assert!((v - (-3.0)).abs() < 1e-12);
    }

    #[test]
    fn r_squared_zero_variance_is_undefined() {
        assert!(matches!(
            r_squared(&[5.0, 5.0, 5.0], &[5.0, 4.0, 6.0]),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn balanced_accuracy_invariant_under_duplication() {
        let cm = ConfusionMatrix::new(40, 30, 20, 10);
        let dup = ConfusionMatrix::new(120, 90, 60, 30);
        let a: f64 = balanced_accuracy(&cm).unwrap();
        let b: f64 = balanced_accuracy(&dup).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn metrics_work_in_f32_too() {
        let cm = ConfusionMatrix::new(40, 30, 20, 10);
        let ba: f32 = balanced_accuracy(&cm).unwrap();
        assert!((ba - 0.7).abs() < 1e-6);
    }
}
