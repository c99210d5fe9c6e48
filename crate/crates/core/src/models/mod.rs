//! Classical heads trained on the balanced fold.

mod forest;
mod gbdt;
mod linear;
pub mod tree;

use serde::{Deserialize, Serialize};

pub use forest::{ForestConfig, RandomForest};
pub use gbdt::{Gbdt, GbdtConfig};
pub use linear::{LogRegConfig, LogisticRegression, Mlp, MlpConfig};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::BalancedFold;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary log-loss of logits `f` against 0/1 targets.
pub(crate) fn log_loss(y: &[f64], f: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .zip(f)
        .map(|(&t, &z)| z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z)
        .sum();
    total / y.len() as f64
}

pub(crate) fn validate_training(x: &Matrix, y: &[u8]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("labels must be binary".into()));
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::SingleClass("training set"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalKind {
    LogReg,
    Mlp,
    RandomForest,
    Gbdt,
}

impl ClassicalKind {
    pub const ALL: [ClassicalKind; 4] = [
        ClassicalKind::LogReg,
        ClassicalKind::Mlp,
        ClassicalKind::RandomForest,
        ClassicalKind::Gbdt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClassicalKind::LogReg => "logreg",
            ClassicalKind::Mlp => "mlp",
            ClassicalKind::RandomForest => "random_forest",
            ClassicalKind::Gbdt => "gbdt",
        }
    }
}

/// Hyperparameters for every classical head.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfigs {
    pub logreg: LogRegConfig,
    pub mlp: MlpConfig,
    pub forest: ForestConfig,
    pub gbdt: GbdtConfig,
}

impl ModelConfigs {
    /// Same hyperparameters with every stochastic head reseeded.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.mlp.seed = seed;
        self.forest.seed = seed;
        self.gbdt.seed = seed;
        self
    }
}

/// Fits `kind` on `x, y` and returns probability-like scores for `eval`.
pub fn fit_predict_xy(
    kind: ClassicalKind,
    configs: &ModelConfigs,
    x: &Matrix,
    y: &[u8],
    eval: &Matrix,
) -> Result<Vec<f64>> {
    if eval.n_rows() > 0 && eval.n_cols() != x.n_cols() {
        return Err(Error::Dimension {
            expected: x.n_cols(),
            got: eval.n_cols(),
        });
    }
    Ok(match kind {
        ClassicalKind::LogReg => LogisticRegression::fit(&configs.logreg, x, y)?.predict_proba(eval),
        ClassicalKind::Mlp => Mlp::fit(&configs.mlp, x, y)?.predict_proba(eval),
        ClassicalKind::RandomForest => RandomForest::fit(&configs.forest, x, y)?.predict_proba(eval),
        ClassicalKind::Gbdt => Gbdt::fit(&configs.gbdt, x, y)?.predict_proba(eval),
    })
}

pub fn fit_predict(
    kind: ClassicalKind,
    configs: &ModelConfigs,
    train: &BalancedFold,
    eval: &Matrix,
) -> Result<Vec<f64>> {
    fit_predict_xy(kind, configs, &train.x, &train.y, eval)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis_data() -> (Matrix, Vec<u8>, Matrix, Vec<u8>) {
        let mk = |offset: usize| {
            let rows: Vec<[f64; 2]> = (0..40)
                .map(|i| {
                    let j = i + offset;
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    [sign * (0.2 + (j % 7) as f64 * 0.3), ((j * 13) % 9) as f64 - 4.0]
                })
                .collect();
            let y = rows.iter().map(|r| u8::from(r[0] > 0.0)).collect::<Vec<_>>();
            (Matrix::from_rows(&rows).unwrap(), y)
        };
        let (x, y) = mk(0);
        let (xt, yt) = mk(3);
        (x, y, xt, yt)
    }

    fn accuracy(scores: &[f64], y: &[u8]) -> f64 {
        scores
            .iter()
            .zip(y)
            .filter(|(s, &t)| u8::from(**s >= 0.5) == t)
            .count() as f64
            / y.len() as f64
    }

    #[test]
    fn every_head_separates_axis_data() {
        let (x, y, xt, yt) = axis_data();
        let cfg = ModelConfigs::default();
        for kind in ClassicalKind::ALL {
            let s = fit_predict_xy(kind, &cfg, &x, &y, &xt).unwrap();
            assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(accuracy(&s, &yt), 1.0, "{kind:?}");
            assert_eq!(s, fit_predict_xy(kind, &cfg, &x, &y, &xt).unwrap());
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        for kind in ClassicalKind::ALL {
            assert!(matches!(
                fit_predict_xy(kind, &ModelConfigs::default(), &x, &[1, 1], &x),
                Err(Error::SingleClass(_))
            ));
        }
    }
}
