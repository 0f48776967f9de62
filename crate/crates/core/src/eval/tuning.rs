//! Nested hyperparameter search on the outer-training partition.
//!
//! The inner loop re-splits the outer-training participants into
//! subject-disjoint folds and scores every grid candidate with the
//! task-appropriate objective: mean balanced accuracy (maximized) for
//! classification, mean MAE (minimized) for regression. Exact ties go to the
//! earlier grid entry.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{balanced_accuracy, mae, ConfusionMatrix};
use crate::eval::splits::make_subject_folds;
use crate::matrix::Matrix;
use crate::models::{derive_seed, labels_from_proba, Task};

use super::experiment::{fit_config, ModelConfig};

/// Everything the inner loop needs about the outer-training partition.
pub struct TuneProblem<'a> {
    /// Outer-train design matrix (selection and scaling already applied).
    pub x: &'a Matrix<f64>,
    pub y_class: &'a [bool],
    pub y_score: &'a [f64],
    /// Participant of each row, parallel to the design matrix.
    pub participants: &'a [String],
    pub task: Task,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub index: usize,
    pub config: ModelConfig,
    /// Mean inner objective; None when every inner fold was skipped.
    pub mean_metric: Option<f64>,
    pub inner_folds_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub best_index: usize,
    pub best: ModelConfig,
    pub per_candidate: Vec<CandidateScore>,
    pub warnings: Vec<String>,
}

fn inner_objective(
    problem: &TuneProblem,
    config: &ModelConfig,
    train_rows: &[usize],
    val_rows: &[usize],
    seed: u64,
    warnings: &mut Vec<String>,
    fold: usize,
) -> Result<Option<f64>> {
    let x_train = problem.x.select_rows(train_rows);
    let x_val = problem.x.select_rows(val_rows);
    match problem.task {
        Task::Classify => {
            let y_train: Vec<bool> = train_rows.iter().map(|&r| problem.y_class[r]).collect();
            let y_val: Vec<bool> = val_rows.iter().map(|&r| problem.y_class[r]).collect();
            let single_class = |ys: &[bool]| ys.iter().all(|&y| y) || ys.iter().all(|&y| !y);
            if single_class(&y_train) || single_class(&y_val) {
                warnings.push(format!(
                    "inner fold {fold}: single-class split, balanced accuracy skipped"
                ));
                return Ok(None);
            }
            let model = fit_config(config, Task::Classify, &x_train, &y_train, &[], seed)?;
            let proba = model.predict(&x_val)?;
            let cm = ConfusionMatrix::from_labels(&y_val, &labels_from_proba(&proba))?;
            Ok(Some(balanced_accuracy(&cm)?))
        }
        Task::Regress => {
            let y_train: Vec<f64> = train_rows.iter().map(|&r| problem.y_score[r]).collect();
            let y_val: Vec<f64> = val_rows.iter().map(|&r| problem.y_score[r]).collect();
            let model = fit_config(config, Task::Regress, &x_train, &[], &y_train, seed)?;
            let pred = model.predict(&x_val)?;
            Ok(Some(mae(&y_val, &pred)?))
        }
    }
}

/// Exhaustive grid search over subject-disjoint inner folds.
pub fn nested_tune(
    problem: &TuneProblem,
    grid: &[ModelConfig],
    inner_k: usize,
) -> Result<TuneOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("nested_tune: empty grid".into()));
    }
    if problem.participants.len() != problem.x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: problem.x.n_rows(),
            got: problem.participants.len(),
        });
    }
    for config in grid {
        config.check_task(problem.task)?;
    }

    let unique: Vec<String> = problem
        .participants
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    let plan = make_subject_folds(&unique, inner_k, derive_seed(problem.seed, 0x7a7e))?;

    // Row splits per inner fold, shared across candidates.
    let mut fold_rows: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(inner_k);
    for fold in plan.folds.iter() {
        let val_pids: BTreeSet<&str> = fold.iter().map(String::as_str).collect();
        let (mut train_rows, mut val_rows) = (Vec::new(), Vec::new());
        for (row, pid) in problem.participants.iter().enumerate() {
            if val_pids.contains(pid.as_str()) {
                val_rows.push(row);
            } else {
                train_rows.push(row);
            }
        }
        fold_rows.push((train_rows, val_rows));
    }

    let mut warnings = Vec::new();
    let mut per_candidate = Vec::with_capacity(grid.len());
    for (index, config) in grid.iter().enumerate() {
        let mut values = Vec::new();
        for (fold, (train_rows, val_rows)) in fold_rows.iter().enumerate() {
            let seed = derive_seed(problem.seed, (1 + index as u64) << 8 | fold as u64);
            if let Some(v) = inner_objective(
                problem, config, train_rows, val_rows, seed, &mut warnings, fold,
            )? {
                values.push(v);
            }
        }
        per_candidate.push(CandidateScore {
            index,
            config: config.clone(),
            mean_metric: if values.is_empty() {
                None
            } else {
                Some(values.iter().sum::<f64>() / values.len() as f64)
            },
            inner_folds_used: values.len(),
        });
    }

    // Higher balanced accuracy wins; lower MAE wins. A candidate with a
    // defined objective always beats one without; exact ties keep the
    // earliest declaration.
    let mut best_index = 0usize;
    for c in &per_candidate[1..] {
        let best = &per_candidate[best_index];
        let better = match (c.mean_metric, best.mean_metric) {
            (Some(v), Some(b)) => match problem.task {
                Task::Classify => v > b,
                Task::Regress => v < b,
            },
            (Some(_), None) => true,
            _ => false,
        };
        if better {
            best_index = c.index;
        }
    }
    if per_candidate[best_index].mean_metric.is_none() {
        warnings.push(
            "every inner fold was skipped for every candidate; defaulting to the first grid entry"
                .into(),
        );
    }

    Ok(TuneOutcome {
        best_index,
        best: grid[best_index].clone(),
        per_candidate,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ForestParams;

    fn synthetic_problem(
        n_participants: usize,
        rows_per: usize,
    ) -> (Matrix<f64>, Vec<bool>, Vec<f64>, Vec<String>) {
        // One informative feature; depth-1 trees suffice.
        let n = n_participants * rows_per;
        let mut x = Vec::with_capacity(n);
        let mut y_class = Vec::with_capacity(n);
        let mut y_score = Vec::with_capacity(n);
        let mut pids = Vec::with_capacity(n);
        for p in 0..n_participants {
            let depressed = p % 2 == 0;
            for r in 0..rows_per {
                let v = if depressed { 1.0 } else { -1.0 };
                let jitter = ((p * rows_per + r) % 7) as f64 * 0.01;
                x.push(vec![v + jitter]);
                y_class.push(depressed);
                y_score.push(if depressed { 500.0 } else { 200.0 });
                pids.push(format!("p{p:02}"));
            }
        }
        (Matrix::from_rows(&x).unwrap(), y_class, y_score, pids)
    }

    fn forest(n_trees: usize, depth: usize) -> ModelConfig {
        ModelConfig::RandomForest(ForestParams {
            n_trees,
            max_depth: Some(depth),
            min_samples_leaf: 1,
            mtry: None,
            max_bins: 16,
        })
    }

    #[test]
    fn dominating_candidate_wins() {
        let (x, y_class, y_score, pids) = synthetic_problem(12, 4);
        let problem = TuneProblem {
            x: &x,
            y_class: &y_class,
            y_score: &y_score,
            participants: &pids,
            task: Task::Classify,
            seed: 11,
        };
        // A leaf floor above the inner-train size forbids any split, so the
        // first candidate degenerates to a constant predictor (BA 1/2) and
        // the real forest dominates.
        let unable_to_split = ModelConfig::RandomForest(ForestParams {
            n_trees: 1,
            max_depth: Some(1),
            min_samples_leaf: 10_000,
            mtry: Some(1),
            max_bins: 16,
        });
        let grid = vec![unable_to_split, forest(20, 3)];
        let outcome = nested_tune(&problem, &grid, 3).unwrap();
        assert_eq!(outcome.per_candidate.len(), 2);
        let weak = outcome.per_candidate[0].mean_metric.unwrap();
        let strong = outcome.per_candidate[1].mean_metric.unwrap();
        assert!((weak - 0.5).abs() < 1e-9, "constant predictor BA = {weak}");
        assert!(strong > 0.95, "strong candidate BA = {strong}");
        assert_eq!(outcome.best_index, 1);
    }

    #[test]
    fn exact_tie_takes_declaration_order() {
        let (x, y_class, y_score, pids) = synthetic_problem(9, 3);
        let problem = TuneProblem {
            x: &x,
            y_class: &y_class,
            y_score: &y_score,
            participants: &pids,
            task: Task::Classify,
            seed: 5,
        };
        // Identical candidates: identical inner scores, so the first wins.
        let grid = vec![forest(10, 2), forest(10, 2)];
        let outcome = nested_tune(&problem, &grid, 3).unwrap();
        assert_eq!(
            outcome.per_candidate[0].mean_metric,
            outcome.per_candidate[1].mean_metric
        );
        assert_eq!(outcome.best_index, 0);
    }

    #[test]
    fn single_entry_grid_still_runs_inner_folds() {
        let (x, y_class, y_score, pids) = synthetic_problem(9, 3);
        let problem = TuneProblem {
            x: &x,
            y_class: &y_class,
            y_score: &y_score,
            participants: &pids,
            task: Task::Regress,
            seed: 3,
        };
        let outcome = nested_tune(&problem, &[forest(5, 2)], 3).unwrap();
        assert_eq!(outcome.best_index, 0);
        assert_eq!(outcome.per_candidate[0].inner_folds_used, 3);
        assert!(outcome.per_candidate[0].mean_metric.unwrap() < 160.0);
    }

    #[test]
    fn single_class_inner_fold_is_skipped_with_warning() {
        // Three participants, all positive except one; with inner_k = 3 some
        // inner validation folds hold a single class.
        let mut x = Vec::new();
        let mut y_class = Vec::new();
        let mut pids = Vec::new();
        for p in 0..6 {
            for r in 0..2 {
                x.push(vec![p as f64 + r as f64 * 0.1]);
                y_class.push(p == 0);
                pids.push(format!("p{p}"));
            }
        }
        let y_score = vec![0.0; y_class.len()];
        let x = Matrix::from_rows(&x).unwrap();
        let problem = TuneProblem {
            x: &x,
            y_class: &y_class,
            y_score: &y_score,
            participants: &pids,
            task: Task::Classify,
            seed: 0,
        };
        let outcome = nested_tune(&problem, &[forest(3, 2)], 3).unwrap();
        assert!(outcome.per_candidate[0].inner_folds_used < 3);
        assert!(!outcome.warnings.is_empty());
        assert!(outcome.warnings[0].contains("single-class"));
    }

    #[test]
    fn empty_grid_rejected() {
        let (x, y_class, y_score, pids) = synthetic_problem(6, 2);
        let problem = TuneProblem {
            x: &x,
            y_class: &y_class,
            y_score: &y_score,
            participants: &pids,
            task: Task::Classify,
            seed: 0,
        };
        assert!(nested_tune(&problem, &[], 3).is_err());
    }
}
