//! Model-agnostic permutation importance: metric degradation after
//! shuffling one feature column at a time.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{balanced_accuracy, mae, ConfusionMatrix};
use crate::matrix::Matrix;
use crate::models::forest::derive_seed;
use crate::models::{labels_from_proba, AnyModel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMetric {
    /// Classification: score drop in balanced accuracy. Targets in {0,1}.
    BalancedAccuracy,
    /// Regression: increase in mean absolute error.
    Mae,
}

fn evaluate<F: Scalar>(
    model: &AnyModel<F>,
    x: &Matrix<F>,
    y: &[F],
    metric: ImportanceMetric,
) -> Result<f64> {
    let pred = model.predict(x)?;
    match metric {
        ImportanceMetric::BalancedAccuracy => {
            let truth: Vec<bool> = y.iter().map(|&v| v == F::one()).collect();
            let cm = ConfusionMatrix::from_labels(&truth, &labels_from_proba(&pred))?;
            balanced_accuracy::<f64>(&cm)
        }
        ImportanceMetric::Mae => {
            let yf: Vec<f64> = y.iter().map(|v| v.to_f64_lossy()).collect();
            let pf: Vec<f64> = pred.iter().map(|v| v.to_f64_lossy()).collect();
            mae(&yf, &pf)
        }
    }
}

/// Per-feature importance: mean over `n_repeats` of the metric degradation
/// when that feature's column is shuffled. Degradation is oriented so that
/// larger = more important for both metrics.
pub fn permutation_importance<F: Scalar>(
    model: &AnyModel<F>,
    x: &Matrix<F>,
    y: &[F],
    metric: ImportanceMetric,
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_repeats < 1 {
        return Err(Error::InvalidArgument(
            "permutation_importance: n_repeats must be >= 1".into(),
        ));
    }
    if y.len() != x.n_rows() {
        return Err(Error::DimensionMismatch { expected: x.n_rows(), got: y.len() });
    }
    let baseline = evaluate(model, x, y, metric)?;
    let p = x.n_cols();
    let mut scores = vec![0.0f64; p];
    let mut shuffled = x.clone();
    for j in 0..p {
        let original = x.column(j);
        let mut total = 0.0;
        for repeat in 0..n_repeats {
            let mut column = original.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                seed,
                (j * n_repeats + repeat) as u64,
            ));
            column.shuffle(&mut rng);
            for (i, &v) in column.iter().enumerate() {
                shuffled.set(i, j, v);
            }
            let degraded = evaluate(model, &shuffled, y, metric)?;
            total += match metric {
                ImportanceMetric::BalancedAccuracy => baseline - degraded,
                ImportanceMetric::Mae => degraded - baseline,
            };
        }
        // Restore the column before moving on.
        for (i, &v) in original.iter().enumerate() {
            shuffled.set(i, j, v);
        }
        scores[j] = total / n_repeats as f64;
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit_random_forest, ForestParams, Task};
    use rand::Rng;

    fn signal_dataset(seed: u64, duplicate_signal: bool) -> (Matrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 300;
        let mut data = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let s = rng.gen::<f64>() * 2.0 - 1.0;
            let noise = rng.gen::<f64>() * 2.0 - 1.0;
            let second = if duplicate_signal { s } else { noise };
            data.extend_from_slice(&[s, second]);
            y.push(f64::from(s > 0.0));
        }
        (Matrix::from_vec(n, 2, data).unwrap(), y)
    }

    #[test]
    fn signal_feature_dominates_noise() {
        let (x, y) = signal_dataset(9, false);
        let params = ForestParams { n_trees: 20, max_depth: Some(4), ..Default::default() };
        let forest = fit_random_forest(&x, &y, Task::Classify, &params, 1).unwrap();
        let scores = permutation_importance(
            &AnyModel::RandomForest(forest),
            &x,
            &y,
            ImportanceMetric::BalancedAccuracy,
            3,
            7,
        )
        .unwrap();
        assert!(scores[0] > 0.2, "signal score {}", scores[0]);
        assert!(scores[1].abs() < 0.05, "noise score {}", scores[1]);
    }

    #[test]
    fn duplicated_signal_shares_credit() {
        // mtry 1 so each node draws its split column at random; otherwise the
        // split tie-break deterministically favors the first copy and the
        // duplicate never enters the model.
        let params = ForestParams {
            n_trees: 30,
            max_depth: Some(4),
            mtry: Some(1),
            ..Default::default()
        };
        let (x_single, y) = signal_dataset(9, false);
        let single = fit_random_forest(&x_single, &y, Task::Classify, &params, 1).unwrap();
        let single_scores = permutation_importance(
            &AnyModel::RandomForest(single),
            &x_single,
            &y,
            ImportanceMetric::BalancedAccuracy,
            3,
            7,
        )
        .unwrap();

        let (x_dup, y_dup) = signal_dataset(9, true);
        let dup = fit_random_forest(&x_dup, &y_dup, Task::Classify, &params, 1).unwrap();
        let dup_scores = permutation_importance(
            &AnyModel::RandomForest(dup),
            &x_dup,
            &y_dup,
            ImportanceMetric::BalancedAccuracy,
            3,
            7,
        )
        .unwrap();
        // With a duplicated column the model can recover from one shuffled
        // copy, so each copy's individual score drops.
        assert!(dup_scores[0] < single_scores[0]);
        assert!(dup_scores[1] < single_scores[0]);
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, y) = signal_dataset(3, false);
        let params = ForestParams { n_trees: 8, max_depth: Some(3), ..Default::default() };
        let forest = fit_random_forest(&x, &y, Task::Classify, &params, 5).unwrap();
        let model = AnyModel::RandomForest(forest);
        let a = permutation_importance(&model, &x, &y, ImportanceMetric::BalancedAccuracy, 2, 11)
            .unwrap();
        let b = permutation_importance(&model, &x, &y, ImportanceMetric::BalancedAccuracy, 2, 11)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_zero_repeats() {
        let (x, y) = signal_dataset(3, false);
        let params = ForestParams { n_trees: 2, ..Default::default() };
        let forest = fit_random_forest(&x, &y, Task::Classify, &params, 5).unwrap();
        assert!(permutation_importance(
            &AnyModel::RandomForest(forest),
            &x,
            &y,
            ImportanceMetric::BalancedAccuracy,
            0,
            1
        )
        .is_err());
    }
}
