//! Plug-in mutual information between a discretized feature and a binary label.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::scale::quantile_sorted;

pub const DEFAULT_BINS: usize = 16;

/// Estimator description reported by the MI-stability audit.
pub const ESTIMATOR: &str = "plug-in, 16 equal-frequency bins, nats";

/// Interior edges at quantiles `i / n_bins`, duplicates removed.
pub fn equal_frequency_edges(values: &[f64], n_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (1..n_bins)
        .map(|i| quantile_sorted(&sorted, i as f64 / n_bins as f64))
        .collect();
    edges.dedup();
    edges
}

/// Bin index = number of edges strictly below the value.
pub fn discretize(values: &[f64], edges: &[f64]) -> Vec<usize> {
    values.iter().map(|&v| edges.partition_point(|&e| e < v)).collect()
}

/// `sum p(b, y) ln(p(b, y) / (p(b) p(y)))` over the observed cells.
pub fn plugin_mi(bins: &[usize], y: &[u8]) -> f64 {
    let n_bins = bins.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![[0usize; 2]; n_bins];
    for (&b, &l) in bins.iter().zip(y) {
        joint[b][usize::from(l != 0)] += 1;
    }
    let n = bins.len() as f64;
    let py = [0, 1].map(|c| joint.iter().map(|j| j[c]).sum::<usize>() as f64 / n);
    let mut mi = 0.0;
    for cell in &joint {
        let pb = (cell[0] + cell[1]) as f64 / n;
        for c in 0..2 {
            if cell[c] > 0 {
                let p = cell[c] as f64 / n;
                mi += p * (p / (pb * py[c])).ln();
            }
        }
    }
    mi.max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiRanking {
    /// MI per feature, in input column order.
    pub scores: Vec<f64>,
    /// Feature indices by descending MI, ties to the lower index.
    pub order: Vec<usize>,
}

pub fn mi_rank(x: &Matrix, y: &[u8]) -> Result<MiRanking> {
    mi_rank_with_bins(x, y, DEFAULT_BINS)
}

pub fn mi_rank_with_bins(x: &Matrix, y: &[u8], n_bins: usize) -> Result<MiRanking> {
    if x.n_rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    let ones = y.iter().filter(|&&v| v != 0).count();
    if ones < 2 || y.len() - ones < 2 {
        return Err(Error::InvalidArgument(
            "MI ranking needs at least 2 rows per class".into(),
        ));
    }
    if n_bins < 2 {
        return Err(Error::InvalidArgument("need at least 2 bins".into()));
    }
    let scores: Vec<f64> = (0..x.n_cols())
        .map(|j| {
            let col = x.column(j);
            let edges = equal_frequency_edges(&col, n_bins);
            plugin_mi(&discretize(&col, &edges), y)
        })
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(MiRanking { scores, order })
}

/// First `k` indices of the ranking.
pub fn select_top_k(ranking: &MiRanking, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > ranking.order.len() {
        return Err(Error::InvalidArgument(format!(
            "top-k with k = {k} over {} features",
            ranking.order.len()
        )));
    }
    Ok(ranking.order[..k].to_vec())
}
