//! CART trees over histogram-binned features.
//!
//! Features are discretized once per training set into at most `max_bins`
//! equal-frequency bins whose edges are actual training values; split search
//! then scans bin histograms instead of sorting rows at every node. Because
//! the binning is rank-based, fitted trees are exactly invariant under any
//! strictly monotone transform of a feature column.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::Task;
use crate::scalar::Scalar;

pub const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node<F> {
    /// Split feature; unused for leaves.
    pub feature: u32,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: F,
    pub left: u32,
    pub right: u32,
    /// Node prediction: mean target (regression) or positive-class
    /// proportion (classification).
    pub value: F,
    /// Training rows that reached this node.
    pub cover: F,
}

impl<F> Node<F> {
    pub fn is_leaf(&self) -> bool {
        self.left == LEAF
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<F> {
    pub nodes: Vec<Node<F>>,
}

impl<F: Scalar> Tree<F> {
    pub fn predict_row(&self, row: &[F]) -> F {
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.is_leaf() {
                return node.value;
            }
            idx = if row[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<F>(nodes: &[Node<F>], idx: usize) -> usize {
            let node = &nodes[idx];
            if node.is_leaf() {
                0
            } else {
                1 + walk(nodes, node.left as usize).max(walk(nodes, node.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }
}

/// Per-training-set histogram codes, shared by every tree in a forest.
pub struct BinnedData<F> {
    /// Column-major bin codes: `codes[j * n_rows + i]`.
    codes: Vec<u8>,
    n_rows: usize,
    n_cols: usize,
    /// Strictly increasing upper edges per feature; splitting after bin `b`
    /// uses threshold `edges[j][b]`, always an actual training value.
    edges: Vec<Vec<F>>,
}

impl<F: Scalar> BinnedData<F> {
    pub fn new(x: &Matrix<F>, max_bins: usize) -> Result<Self> {
        let (n, p) = (x.n_rows(), x.n_cols());
        if n == 0 || p == 0 {
            return Err(Error::InvalidArgument("BinnedData: empty matrix".into()));
        }
        if !(2..=256).contains(&max_bins) {
            return Err(Error::InvalidArgument(format!(
                "BinnedData: max_bins {max_bins} outside [2,256]"
            )));
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("BinnedData: non-finite feature value".into()));
        }
        let mut codes = vec![0u8; n * p];
        let mut edges = Vec::with_capacity(p);
        let mut sorted: Vec<F> = Vec::with_capacity(n);
        for j in 0..p {
            sorted.clear();
            sorted.extend(x.column(j));
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // Equal-frequency candidate edges; duplicates collapse so edges
            // are strictly increasing and never include the column maximum.
            let mut feature_edges: Vec<F> = Vec::new();
            let max_value = sorted[n - 1];
            for k in 0..max_bins - 1 {
                let pos = ((k + 1) * n).div_ceil(max_bins) - 1;
                let edge = sorted[pos];
                if edge < max_value && feature_edges.last() != Some(&edge) {
                    feature_edges.push(edge);
                }
            }
            let column = x.column(j);
            for (i, &v) in column.iter().enumerate() {
                let code = feature_edges.partition_point(|e| *e < v);
                codes[j * n + i] = code as u8;
            }
            edges.push(feature_edges);
        }
        Ok(Self { codes, n_rows: n, n_cols: p, edges })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }

    #[inline]
    fn code(&self, feature: usize, row: usize) -> usize {
        self.codes[feature * self.n_rows + row] as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features sampled per node.
    pub mtry: usize,
}

struct Grower<'a, F> {
    data: &'a BinnedData<F>,
    y: &'a [F],
    task: Task,
    config: &'a TreeConfig,
    nodes: Vec<Node<F>>,
    feature_pool: Vec<u32>,
    hist_cnt: Vec<u32>,
    hist_sum: Vec<F>,
    scratch: Vec<u32>,
}

struct BestSplit<F> {
    gain: F,
    feature: usize,
    bin: usize,
    n_left: usize,
}

impl<F: Scalar> Grower<'_, F> {
    /// Greedy best split over an mtry sample of features. Ties on gain break
    /// toward the lower feature index, then the lower threshold.
    fn find_split(&mut self, rows: &[u32], rng: &mut ChaCha8Rng) -> Option<BestSplit<F>> {
        let n_node = rows.len();
        let msl = self.config.min_samples_leaf;
        if n_node < 2 * msl || n_node < 2 {
            return None;
        }
        let mut total_sum = F::zero();
        for &r in rows {
            total_sum += self.y[r as usize];
        }
        // Pure nodes never split.
        match self.task {
            Task::Classify => {
                if total_sum == F::zero() || total_sum == F::from_count(n_node) {
                    return None;
                }
            }
            Task::Regress => {
                let mean = total_sum / F::from_count(n_node);
                if rows
                    .iter()
                    .all(|&r| (self.y[r as usize] - mean).abs() <= F::from_f64_lossy(1e-12))
                {
                    return None;
                }
            }
        }

        // Partial Fisher–Yates: the first mtry entries of the pool become
        // this node's candidate features.
        let p = self.data.n_cols();
        let mtry = self.config.mtry.min(p);
        for k in 0..mtry {
            let j = rng.gen_range(k..p);
            self.feature_pool.swap(k, j);
        }

        let n_node_f = F::from_count(n_node);
        // "Bigger is better" proxy for the impurity decrease; both criteria
        // reduce to functions of per-side (count, sum).
        let parent_term = match self.task {
            Task::Classify => -(total_sum * (n_node_f - total_sum)) / n_node_f,
            Task::Regress => total_sum * total_sum / n_node_f,
        };
        let mut best: Option<BestSplit<F>> = None;
        for k in 0..mtry {
            let feature = self.feature_pool[k] as usize;
            let n_bins = self.data.n_bins(feature);
            if n_bins < 2 {
                continue;
            }
            let cnt = &mut self.hist_cnt[..n_bins];
            let sum = &mut self.hist_sum[..n_bins];
            cnt.fill(0);
            sum.fill(F::zero());
            for &r in rows {
                let b = self.data.code(feature, r as usize);
                cnt[b] += 1;
                sum[b] += self.y[r as usize];
            }
            let mut nl = 0usize;
            let mut sl = F::zero();
            for b in 0..n_bins - 1 {
                nl += cnt[b] as usize;
                sl += sum[b];
                if cnt[b] == 0 {
                    continue; // identical partition to the previous boundary
                }
                let nr = n_node - nl;
                if nr < msl {
                    break; // nr only shrinks as the boundary moves right
                }
                if nl < msl {
                    continue;
                }
                let sr = total_sum - sl;
                let nl_f = F::from_count(nl);
                let nr_f = F::from_count(nr);
                let children_term = match self.task {
                    Task::Classify => {
                        -((sl * (nl_f - sl)) / nl_f) - ((sr * (nr_f - sr)) / nr_f)
                    }
                    Task::Regress => sl * sl / nl_f + sr * sr / nr_f,
                };
                let gain = children_term - parent_term;
                if gain <= F::from_f64_lossy(1e-12) {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(current) => {
                        gain > current.gain
                            || (gain == current.gain
                                && (feature < current.feature
                                    || (feature == current.feature && b < current.bin)))
                    }
                };
                if better {
                    best = Some(BestSplit { gain, feature, bin: b, n_left: nl });
                }
            }
        }
        best
    }

    fn node_value(&self, rows: &[u32]) -> (F, F) {
        let mut sum = F::zero();
        for &r in rows {
            sum += self.y[r as usize];
        }
        let n = F::from_count(rows.len());
        (sum / n, n)
    }

    fn grow(&mut self, rows: &mut [u32], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let (value, cover) = self.node_value(rows);
        let node_idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            feature: 0,
            threshold: F::zero(),
            left: LEAF,
            right: LEAF,
            value,
            cover,
        });
        let at_depth_limit = self.config.max_depth.is_some_and(|d| depth >= d);
        if at_depth_limit {
            return node_idx;
        }
        let Some(split) = self.find_split(rows, rng) else {
            return node_idx;
        };

        // Stable partition keeps row order deterministic.
        self.scratch.clear();
        let mut write = 0usize;
        for i in 0..rows.len() {
            let r = rows[i];
            if self.data.code(split.feature, r as usize) <= split.bin {
                rows[write] = r;
                write += 1;
            } else {
                self.scratch.push(r);
            }
        }
        debug_assert_eq!(write, split.n_left);
        rows[write..].copy_from_slice(&self.scratch);

        let threshold = self.data.edges[split.feature][split.bin];
        let (left_rows, right_rows) = rows.split_at_mut(write);
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        let node = &mut self.nodes[node_idx as usize];
        node.feature = split.feature as u32;
        node.threshold = threshold;
        node.left = left;
        node.right = right;
        node_idx
    }
}

/// Grow one CART tree on the given (typically bootstrap) row multiset.
pub fn grow_tree<F: Scalar>(
    data: &BinnedData<F>,
    y: &[F],
    task: Task,
    rows: &mut [u32],
    config: &TreeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Tree<F>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("grow_tree: no training rows".into()));
    }
    if y.len() != data.n_rows() {
        return Err(Error::DimensionMismatch { expected: data.n_rows(), got: y.len() });
    }
    if config.mtry == 0 {
        return Err(Error::InvalidArgument("grow_tree: mtry must be >= 1".into()));
    }
    let max_bins = (0..data.n_cols()).map(|j| data.n_bins(j)).max().unwrap_or(1);
    let mut grower = Grower {
        data,
        y,
        task,
        config,
        nodes: Vec::new(),
        feature_pool: (0..data.n_cols() as u32).collect(),
        hist_cnt: vec![0; max_bins],
        hist_sum: vec![F::zero(); max_bins],
        scratch: Vec::with_capacity(rows.len()),
    };
    grower.grow(rows, 0, rng);
    Ok(Tree { nodes: grower.nodes })
}
