//! Gradient-boosted trees with logistic loss.
//!
//! Each round fits a least-squares regression tree to the residuals
//! `y - sigmoid(F)` and adds it with shrinkage. Without second-order leaf
//! weights the per-round step is a bounded-curvature descent step, so the
//! training log-loss never increases for learning rates in `(0, 1]`.

use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, SortedColumns, TreeParams};
use super::{log_loss, sigmoid, validate_training};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument(
                "GBDT n_trees, max_depth and min_samples_leaf must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "GBDT learning rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gbdt {
    base: f64,
    learning_rate: f64,
    trees: Vec<RegressionTree>,
    /// Training log-loss after the base score (index 0) and after each round.
    pub train_loss: Vec<f64>,
}

impl Gbdt {
    pub fn fit(config: &GbdtConfig, x: &Matrix, y: &[u8]) -> Result<Self> {
        config.validate()?;
        validate_training(x, y)?;
        let n = y.len();
        let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let prior = yf.iter().sum::<f64>() / n as f64;
        let base = (prior / (1.0 - prior)).ln();
        let mut f = vec![base; n];
        let rows: Vec<usize> = (0..n).collect();
        let sorted = SortedColumns::new(x, &rows);
        let params = TreeParams {
            max_depth: Some(config.max_depth),
            min_samples_leaf: config.min_samples_leaf,
            max_features: None,
        };
        let mut train_loss = vec![log_loss(&yf, &f)];
        let mut trees = Vec::with_capacity(config.n_trees);
        let mut residual = vec![0.0; n];
        for _ in 0..config.n_trees {
            for i in 0..n {
                residual[i] = yf[i] - sigmoid(f[i]);
            }
            let tree = RegressionTree::fit_sorted(x, &residual, &sorted, &params, None);
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += config.learning_rate * tree.predict(x.row(i));
            }
            train_loss.push(log_loss(&yf, &f));
            trees.push(tree);
        }
        Ok(Self {
            base,
            learning_rate: config.learning_rate,
            trees,
            train_loss,
        })
    }

    pub fn decision_function(&self, row: &[f64]) -> f64 {
        self.base
            + self
                .trees
                .iter()
                .map(|t| self.learning_rate * t.predict(row))
                .sum::<f64>()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| sigmoid(self.decision_function(r))).collect()
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }
}
