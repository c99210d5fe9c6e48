use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};
use super::validate_training;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    /// Features per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
}

impl RandomForest {
    pub fn fit(config: &ForestConfig, x: &Matrix, y: &[u8]) -> Result<Self> {
        validate_training(x, y)?;
        if config.n_trees == 0 {
            return Err(Error::InvalidArgument("forest needs at least one tree".into()));
        }
        let d = x.n_cols();
        let max_features = config
            .max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d);
        let params = TreeParams {
            max_depth: config.max_depth,
            min_samples_leaf: 1,
            max_features: Some(max_features),
        };
        let target: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let n = y.len();
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(1_000_003).wrapping_add(t as u64));
                let rows: Vec<usize> = if config.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit(x, &target, &rows, &params, Some(&mut rng))
            })
            .collect();
        Ok(Self { trees })
    }

    /// Mean of per-tree positive fractions.
    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.rows()
            .map(|r| self.trees.iter().map(|t| t.predict(r)).sum::<f64>() / self.trees.len() as f64)
            .collect()
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }
}
