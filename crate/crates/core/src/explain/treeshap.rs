//! Exact path-dependent TreeSHAP.
//!
//! Implements the polynomial-time decision-path algorithm: the path tracks,
//! per unique feature, the fraction of one/zero extensions and the
//! permutation weight; leaves distribute their value over the path via the
//! unwound weight sums. Conditional expectations use node covers, i.e. the
//! training rows that reached each node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::tree::{Node, Tree};
use crate::models::RandomForest;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution<F> {
    pub base_value: F,
    pub phi: Vec<F>,
    pub prediction: F,
}

impl<F: Scalar> Attribution<F> {
    /// Local accuracy residual: `base + sum(phi) - prediction`.
    pub fn residual(&self) -> F {
        self.base_value + self.phi.iter().copied().sum::<F>() - self.prediction
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement<F> {
    feature: usize,
    zero_fraction: F,
    one_fraction: F,
    pweight: F,
}

#[derive(Debug, Clone)]
struct Path<F> {
    elements: Vec<PathElement<F>>,
}

impl<F: Scalar> Path<F> {
    fn new() -> Self {
        Self { elements: Vec::with_capacity(16) }
    }

    fn get(&mut self, i: usize) -> PathElement<F> {
        self.ensure(i);
        self.elements[i]
    }

    fn get_mut(&mut self, i: usize) -> &mut PathElement<F> {
        self.ensure(i);
        &mut self.elements[i]
    }

    fn ensure(&mut self, i: usize) {
        if i == self.elements.len() {
            self.elements.push(PathElement {
                feature: usize::MAX,
                zero_fraction: F::zero(),
                one_fraction: F::zero(),
                pweight: F::zero(),
            });
        }
    }
}

fn extend_path<F: Scalar>(
    path: &mut Path<F>,
    unique_depth: usize,
    zero_fraction: F,
    one_fraction: F,
    feature: usize,
) {
    let element = path.get_mut(unique_depth);
    element.feature = feature;
    element.zero_fraction = zero_fraction;
    element.one_fraction = one_fraction;
    element.pweight = if unique_depth == 0 { F::one() } else { F::zero() };
    let depth_plus = F::from_count(unique_depth + 1);
    for i in (0..unique_depth).rev() {
        let w = path.get(i).pweight;
        path.get_mut(i + 1).pweight +=
            one_fraction * w * F::from_count(i + 1) / depth_plus;
        path.get_mut(i).pweight =
            zero_fraction * w * F::from_count(unique_depth - i) / depth_plus;
    }
}

fn unwind_path<F: Scalar>(path: &mut Path<F>, unique_depth: usize, path_index: usize) {
    let one_fraction = path.get(path_index).one_fraction;
    let zero_fraction = path.get(path_index).zero_fraction;
    let mut next_one_portion = path.get(unique_depth).pweight;
    let depth_plus = F::from_count(unique_depth + 1);
    for i in (0..unique_depth).rev() {
        if one_fraction != F::zero() {
            let tmp = path.get(i).pweight;
            path.get_mut(i).pweight =
                next_one_portion * depth_plus / (F::from_count(i + 1) * one_fraction);
            next_one_portion = tmp
                - path.get(i).pweight * zero_fraction * F::from_count(unique_depth - i)
                    / depth_plus;
        } else {
            let w = path.get(i).pweight;
            path.get_mut(i).pweight =
                w * depth_plus / (zero_fraction * F::from_count(unique_depth - i));
        }
    }
    for i in path_index..unique_depth {
        let next = path.get(i + 1);
        let element = path.get_mut(i);
        element.feature = next.feature;
        element.zero_fraction = next.zero_fraction;
        element.one_fraction = next.one_fraction;
    }
}

fn unwound_path_sum<F: Scalar>(
    path: &mut Path<F>,
    unique_depth: usize,
    path_index: usize,
) -> F {
    let one_fraction = path.get(path_index).one_fraction;
    let zero_fraction = path.get(path_index).zero_fraction;
    let mut next_one_portion = path.get(unique_depth).pweight;
    let mut total = F::zero();
    let depth_plus = F::from_count(unique_depth + 1);
    for i in (0..unique_depth).rev() {
        if one_fraction != F::zero() {
            let tmp = next_one_portion * depth_plus / (F::from_count(i + 1) * one_fraction);
            total += tmp;
            next_one_portion = path.get(i).pweight
                - tmp * zero_fraction * (F::from_count(unique_depth - i) / depth_plus);
        } else if zero_fraction != F::zero() {
            total += (path.get(i).pweight / zero_fraction)
                / (F::from_count(unique_depth - i) / depth_plus);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Scalar>(
    nodes: &[Node<F>],
    row: &[F],
    phi: &mut [F],
    node_index: usize,
    mut unique_depth: usize,
    mut path: Path<F>,
    parent_zero_fraction: F,
    parent_one_fraction: F,
    parent_feature: usize,
) {
    let node = &nodes[node_index];
    extend_path(
        &mut path,
        unique_depth,
        parent_zero_fraction,
        parent_one_fraction,
        parent_feature,
    );
    if node.is_leaf() {
        for i in 1..=unique_depth {
            let w = unwound_path_sum(&mut path, unique_depth, i);
            let el = path.get(i);
            phi[el.feature] += w * (el.one_fraction - el.zero_fraction) * node.value;
        }
        return;
    }

    let feature = node.feature as usize;
    let (hot, cold) = if row[feature] <= node.threshold {
        (node.left as usize, node.right as usize)
    } else {
        (node.right as usize, node.left as usize)
    };
    let mut incoming_zero = F::one();
    let mut incoming_one = F::one();
    // If this feature already sits on the path, pull out its fractions and
    // unwind it before re-extending.
    let mut path_index = 0usize;
    while path_index <= unique_depth {
        if path.get(path_index).feature == feature {
            break;
        }
        path_index += 1;
    }
    if path_index != unique_depth + 1 {
        incoming_zero = path.get(path_index).zero_fraction;
        incoming_one = path.get(path_index).one_fraction;
        unwind_path(&mut path, unique_depth, path_index);
        unique_depth -= 1;
    }

    let cover = node.cover;
    recurse(
        nodes,
        row,
        phi,
        hot,
        unique_depth + 1,
        path.clone(),
        nodes[hot].cover / cover * incoming_zero,
        incoming_one,
        feature,
    );
    recurse(
        nodes,
        row,
        phi,
        cold,
        unique_depth + 1,
        path,
        nodes[cold].cover / cover * incoming_zero,
        F::zero(),
        feature,
    );
}

/// Cover-weighted expected value of one tree (the SHAP base value).
fn expected_value<F: Scalar>(tree: &Tree<F>) -> F {
    fn walk<F: Scalar>(nodes: &[Node<F>], idx: usize) -> F {
        let node = &nodes[idx];
        if node.is_leaf() {
            node.cover * node.value
        } else {
            walk(nodes, node.left as usize) + walk(nodes, node.right as usize)
        }
    }
    walk(&tree.nodes, 0) / tree.nodes[0].cover
}

fn single_tree_phi<F: Scalar>(tree: &Tree<F>, row: &[F], phi: &mut [F]) {
    recurse(
        &tree.nodes,
        row,
        phi,
        0,
        0,
        Path::new(),
        F::one(),
        F::one(),
        usize::MAX - 1,
    );
}

/// Exact TreeSHAP attribution of one sample under a forest: per-tree
/// attributions averaged with the same weights as the forest prediction.
pub fn tree_shap<F: Scalar>(forest: &RandomForest<F>, row: &[F]) -> Result<Attribution<F>> {
    if row.len() != forest.n_features {
        return Err(Error::DimensionMismatch {
            expected: forest.n_features,
            got: row.len(),
        });
    }
    let mut phi = vec![F::zero(); forest.n_features];
    let mut base = F::zero();
    for tree in &forest.trees {
        single_tree_phi(tree, row, &mut phi);
        base += expected_value(tree);
    }
    let n_trees = F::from_count(forest.trees.len());
    for p in phi.iter_mut() {
        *p = *p / n_trees;
    }
    Ok(Attribution {
        base_value: base / n_trees,
        phi,
        prediction: forest.predict_row(row),
    })
}

/// Attribute every row of `x`; rows are independent and run in parallel with
/// order preserved.
pub fn tree_shap_batch<F: Scalar>(
    forest: &RandomForest<F>,
    x: &Matrix<F>,
) -> Result<Vec<Attribution<F>>> {
    (0..x.n_rows())
        .into_par_iter()
        .map(|i| tree_shap(forest, x.row(i)))
        .collect()
}

/// Replace every node's cover with the number of `background` rows that
/// reach it, so expectations are taken over an explicit background set
/// instead of each tree's bootstrap sample.
pub fn recompute_covers<F: Scalar>(
    forest: &mut RandomForest<F>,
    background: &Matrix<F>,
) -> Result<()> {
    if background.n_cols() != forest.n_features {
        return Err(Error::DimensionMismatch {
            expected: forest.n_features,
            got: background.n_cols(),
        });
    }
    if background.n_rows() == 0 {
        return Err(Error::InvalidArgument("recompute_covers: empty background".into()));
    }
    for tree in &mut forest.trees {
        let mut counts = vec![0u64; tree.nodes.len()];
        for row in background.rows() {
            let mut idx = 0usize;
            loop {
                counts[idx] += 1;
                let node = &tree.nodes[idx];
                if node.is_leaf() {
                    break;
                }
                idx = if row[node.feature as usize] <= node.threshold {
                    node.left as usize
                } else {
                    node.right as usize
                };
            }
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Validation(format!(
                "recompute_covers: node {empty} receives no background rows"
            )));
        }
        for (node, &c) in tree.nodes.iter_mut().zip(&counts) {
            node.cover = F::from_count(c as usize);
        }
    }
    Ok(())
}

/// Brute-force Shapley values by coalition enumeration, using the same
/// cover-based conditional expectation as the path algorithm. Exponential in
/// feature count; the oracle for small-forest verification.
pub fn brute_force_shap<F: Scalar>(
    forest: &RandomForest<F>,
    row: &[F],
) -> Result<Attribution<F>> {
    let p = forest.n_features;
    if row.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: row.len() });
    }
    if p > 20 {
        return Err(Error::InvalidArgument(format!(
            "brute_force_shap: {p} features is too many for 2^p enumeration"
        )));
    }
    fn exp_value<F: Scalar>(nodes: &[Node<F>], idx: usize, row: &[F], mask: u32) -> F {
        let node = &nodes[idx];
        if node.is_leaf() {
            return node.value;
        }
        let feature = node.feature as usize;
        if mask & (1u32 << feature) != 0 {
            let next = if row[feature] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
            exp_value(nodes, next, row, mask)
        } else {
            let left = exp_value(nodes, node.left as usize, row, mask);
            let right = exp_value(nodes, node.right as usize, row, mask);
            (nodes[node.left as usize].cover * left
                + nodes[node.right as usize].cover * right)
                / node.cover
        }
    }
    // v(S) for every coalition, summed over trees (mean).
    let n_trees = F::from_count(forest.trees.len());
    let n_masks = 1usize << p;
    let mut v = vec![F::zero(); n_masks];
    for (mask, slot) in v.iter_mut().enumerate() {
        let mut total = F::zero();
        for tree in &forest.trees {
            total += exp_value(&tree.nodes, 0, row, mask as u32);
        }
        *slot = total / n_trees;
    }
    // Factorial weights |S|!(p-|S|-1)!/p!.
    let mut factorial = vec![1.0f64; p + 1];
    for i in 1..=p {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let mut phi = vec![F::zero(); p];
    for (j, phi_j) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        for mask in 0..n_masks {
            if mask & bit != 0 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            let weight =
                F::from_f64_lossy(factorial[s] * factorial[p - s - 1] / factorial[p]);
            *phi_j += weight * (v[mask | bit] - v[mask]);
        }
    }
    Ok(Attribution {
        base_value: v[0],
        phi,
        prediction: forest.predict_row(row),
    })
}
