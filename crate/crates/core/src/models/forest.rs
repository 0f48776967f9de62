//! Bagged CART forests with per-node feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::tree::{grow_tree, BinnedData, Tree, TreeConfig};
use crate::models::Task;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features sampled per node; None = ceil(sqrt(p)) for classification,
    /// ceil(p/3) for regression.
    pub mtry: Option<usize>,
    pub max_bins: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            mtry: None,
            max_bins: 255,
        }
    }
}

impl ForestParams {
    pub fn resolve_mtry(&self, n_features: usize, task: Task) -> usize {
        let chosen = self.mtry.unwrap_or(match task {
            Task::Classify => (n_features as f64).sqrt().ceil() as usize,
            Task::Regress => (n_features as f64 / 3.0).ceil() as usize,
        });
        chosen.clamp(1, n_features)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest<F> {
    pub trees: Vec<Tree<F>>,
    pub task: Task,
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
}

/// Stateless per-tree seed derivation (splitmix64 finalizer) so training is
/// schedule-independent: tree i gets the same stream no matter which thread
/// grows it.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fit_random_forest<F: Scalar>(
    x: &Matrix<F>,
    y: &[F],
    task: Task,
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForest<F>> {
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "fit_random_forest: need >=2 samples, got {n}"
        )));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("fit_random_forest: n_trees must be >= 1".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit_random_forest: non-finite target".into()));
    }
    if task == Task::Classify && y.iter().any(|&v| v != F::zero() && v != F::one()) {
        return Err(Error::InvalidArgument(
            "fit_random_forest: classification labels must be 0 or 1".into(),
        ));
    }
    if let Some(m) = params.mtry {
        if m == 0 || m > x.n_cols() {
            return Err(Error::InvalidArgument(format!(
                "fit_random_forest: mtry {m} outside [1,{}]",
                x.n_cols()
            )));
        }
    }

    let data = BinnedData::new(x, params.max_bins)?;
    let tree_config = TreeConfig {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf.max(1),
        mtry: params.resolve_mtry(x.n_cols(), task),
    };
    let trees: Vec<Tree<F>> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            // Bootstrap: n draws with replacement.
            let mut rows: Vec<u32> =
                (0..n).map(|_| rng.gen_range(0..n) as u32).collect();
            grow_tree(&data, y, task, &mut rows, &tree_config, &mut rng)
        })
        .collect::<Result<_>>()?;

    Ok(RandomForest {
        trees,
        task,
        params: params.clone(),
        seed,
        n_features: x.n_cols(),
    })
}

impl<F: Scalar> RandomForest<F> {
    /// Mean over trees: class-1 proportion (classification) or mean target
    /// (regression).
    pub fn predict(&self, x: &Matrix<F>) -> Result<Vec<F>> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.n_cols(),
            });
        }
        let n_trees = F::from_count(self.trees.len());
        Ok(x.rows()
            .map(|row| {
                self.trees
                    .iter()
                    .map(|t| t.predict_row(row))
                    .sum::<F>()
                    / n_trees
            })
            .collect())
    }

    pub fn predict_row(&self, row: &[F]) -> F {
        let n_trees = F::from_count(self.trees.len());
        self.trees.iter().map(|t| t.predict_row(row)).sum::<F>() / n_trees
    }
}
