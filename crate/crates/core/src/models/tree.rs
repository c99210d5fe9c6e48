//! Least-squares regression tree shared by the boosted ensemble and the forest.
//!
//! On 0/1 targets the squared-error reduction is proportional to the Gini
//! decrease, so the forest reuses this builder with leaf value = positive
//! fraction. Split ties resolve to the lowest feature index, then the lowest
//! threshold.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` examines all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

const MIN_GAIN: f64 = 1e-12;

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Scans one feature whose rows arrive sorted by value, updating `best`.
#[allow(clippy::too_many_arguments)]
fn scan_feature(
    x: &Matrix,
    target: &[f64],
    sorted: &[usize],
    f: usize,
    min_leaf: usize,
    total: f64,
    parent: f64,
    best: &mut Option<BestSplit>,
) {
    let n = sorted.len();
    let mut left_sum = 0.0;
    for pos in 0..n - 1 {
        left_sum += target[sorted[pos]];
        let n_left = pos + 1;
        let n_right = n - n_left;
        if n_left < min_leaf || n_right < min_leaf {
            continue;
        }
        let (v, next) = (x.get(sorted[pos], f), x.get(sorted[pos + 1], f));
        if v == next {
            continue;
        }
        let right_sum = total - left_sum;
        let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64 - parent;
        if gain > MIN_GAIN && best.is_none_or(|b| gain > b.gain) {
            *best = Some(BestSplit {
                feature: f,
                threshold: midpoint(v, next),
                gain,
            });
        }
    }
}

fn parent_terms(target: &[f64], rows: &[usize]) -> (f64, f64) {
    let total: f64 = rows.iter().map(|&i| target[i]).sum();
    (total, total * total / rows.len() as f64)
}

/// Best squared-error split of `rows` over `features`, or `None` when no split
/// improves on the parent by more than a rounding margin.
pub fn best_split(
    x: &Matrix,
    target: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<BestSplit> {
    if rows.len() < 2 * min_leaf.max(1) {
        return None;
    }
    let (total, parent) = parent_terms(target, rows);
    let mut best = None;
    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        scan_feature(x, target, &sorted, f, min_leaf, total, parent, &mut best);
    }
    best
}

/// Training rows presorted by every feature, shared by all trees fitted on
/// the same `(x, rows)`. Positions index into `rows`.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    rows: Vec<usize>,
    order: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &Matrix, rows: &[usize]) -> Self {
        let order = (0..x.n_cols())
            .map(|f| {
                let mut pos: Vec<u32> = (0..rows.len() as u32).collect();
                pos.sort_by(|&a, &b| x.get(rows[a as usize], f).total_cmp(&x.get(rows[b as usize], f)));
                pos
            })
            .collect();
        Self {
            rows: rows.to_vec(),
            order,
        }
    }
}

// Below this share of the training rows a node re-sorts instead of filtering
// the presorted columns.
const FILTER_FRACTION: usize = 8;

impl RegressionTree {
    /// Fits on `rows` (duplicates allowed, as in bootstrap samples).
    pub fn fit(
        x: &Matrix,
        target: &[f64],
        rows: &[usize],
        params: &TreeParams,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        Self::fit_sorted(x, target, &SortedColumns::new(x, rows), params, rng)
    }

    /// As [`RegressionTree::fit`], reusing presorted columns.
    pub fn fit_sorted(
        x: &Matrix,
        target: &[f64],
        sorted: &SortedColumns,
        params: &TreeParams,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let d = x.n_cols();
        let n_all = sorted.rows.len();
        let all_features: Vec<usize> = (0..d).collect();
        let mut owner = vec![0u32; n_all];
        let mut nodes = vec![Node::Leaf(0.0)];
        let mut scratch = Vec::with_capacity(n_all);
        // (node slot, positions, depth)
        let mut stack = vec![(0usize, (0..n_all).collect::<Vec<usize>>(), 0usize)];
        while let Some((slot, positions, depth)) = stack.pop() {
            let node_rows: Vec<usize> = positions.iter().map(|&p| sorted.rows[p]).collect();
            let mean = if node_rows.is_empty() {
                0.0
            } else {
                node_rows.iter().map(|&i| target[i]).sum::<f64>() / node_rows.len() as f64
            };
            let min_leaf = params.min_samples_leaf;
            let depth_ok = params.max_depth.is_none_or(|m| depth < m);
            let split = if depth_ok && node_rows.len() >= 2 * min_leaf.max(1) {
                let features = match (params.max_features, rng.as_deref_mut()) {
                    (Some(m), Some(r)) if m < d => {
                        let mut f = sample(r, d, m).into_vec();
                        f.sort_unstable();
                        f
                    }
                    _ => all_features.clone(),
                };
                let (total, parent) = parent_terms(target, &node_rows);
                let filter = node_rows.len() * FILTER_FRACTION >= n_all;
                let mut best = None;
                for &f in &features {
                    scratch.clear();
                    if filter {
                        scratch.extend(
                            sorted.order[f]
                                .iter()
                                .map(|&p| p as usize)
                                .filter(|&p| owner[p] == slot as u32)
                                .map(|p| sorted.rows[p]),
                        );
                    } else {
                        scratch.extend_from_slice(&node_rows);
                        scratch.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
                    }
                    scan_feature(x, target, &scratch, f, min_leaf, total, parent, &mut best);
                }
                best
            } else {
                None
            };
            match split {
                None => nodes[slot] = Node::Leaf(mean),
                Some(s) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = positions
                        .iter()
                        .partition(|&&p| x.get(sorted.rows[p], s.feature) <= s.threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf(0.0));
                    nodes.push(Node::Leaf(0.0));
                    nodes[slot] = Node::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right: left + 1,
                    };
                    for &p in &l {
                        owner[p] = left as u32;
                    }
                    for &p in &r {
                        owner[p] = left as u32 + 1;
                    }
                    stack.push((left + 1, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        Self { nodes }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Root split as `(feature, threshold)`, if the tree is not a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf(_) => None,
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}
