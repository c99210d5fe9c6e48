//! L2-regularized logistic regression and a one-hidden-layer perceptron.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{sigmoid, validate_training};
use crate::error::Result;
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub l2: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            l2: 1.0,
            tolerance: 1e-6,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Mean log-loss plus `l2 / (2n) * |w|^2`; the bias is not penalized.
fn logreg_objective(x: &Matrix, y: &[f64], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (i, row) in x.rows().enumerate() {
        let z = dot(row, w) + b;
        // log(1 + e^z) - y z, evaluated stably
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y[i] * z;
        let r = sigmoid(z) - y[i];
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
        gb += r;
    }
    let reg: f64 = w.iter().map(|v| v * v).sum::<f64>() * l2 / (2.0 * n);
    for (g, v) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * v / n;
    }
    (loss / n + reg, gw, gb / n)
}

impl LogisticRegression {
    /// Gradient descent with Armijo backtracking until the gradient norm drops
    /// below the tolerance.
    pub fn fit(config: &LogRegConfig, x: &Matrix, y: &[u8]) -> Result<Self> {
        validate_training(x, y)?;
        let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let mut w = vec![0.0; x.n_cols()];
        let mut b = 0.0;
        let mut step: f64 = 1.0;
        for _ in 0..config.max_iter {
            let (loss, gw, gb) = logreg_objective(x, &yf, &w, b, config.l2);
            let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
            if gnorm2.sqrt() < config.tolerance {
                break;
            }
            step = (step * 2.0).min(1e3);
            loop {
                let w_new: Vec<f64> = w.iter().zip(&gw).map(|(v, g)| v - step * g).collect();
                let b_new = b - step * gb;
                let (l_new, _, _) = logreg_objective(x, &yf, &w_new, b_new, config.l2);
                if l_new <= loss - 0.5 * step * gnorm2 || step < 1e-12 {
                    w = w_new;
                    b = b_new;
                    break;
                }
                step *= 0.5;
            }
        }
        Ok(Self { weights: w, bias: b })
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| sigmoid(dot(r, &self.weights) + self.bias)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            learning_rate: 0.05,
            epochs: 500,
            seed: 0,
        }
    }
}

/// `d -> hidden (ReLU) -> 1 (sigmoid)`, trained by full-batch gradient descent
/// on mean cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    w1: Vec<f64>, // hidden x d, row-major
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    d: usize,
}

impl Mlp {
    pub fn fit(config: &MlpConfig, x: &Matrix, y: &[u8]) -> Result<Self> {
        validate_training(x, y)?;
        let (n, d, h) = (x.n_rows(), x.n_cols(), config.hidden.max(1));
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let he1 = Normal::new(0.0, (2.0 / d.max(1) as f64).sqrt()).expect("finite std");
        let he2 = Normal::new(0.0, (2.0 / h as f64).sqrt()).expect("finite std");
        let mut m = Mlp {
            w1: (0..h * d).map(|_| he1.sample(&mut rng)).collect(),
            b1: vec![0.0; h],
            w2: (0..h).map(|_| he2.sample(&mut rng)).collect(),
            b2: 0.0,
            d,
        };
        let mut hidden = vec![0.0; h];
        let mut gw1 = vec![0.0; h * d];
        let mut gb1 = vec![0.0; h];
        let mut gw2 = vec![0.0; h];
        for _ in 0..config.epochs {
            gw1.fill(0.0);
            gb1.fill(0.0);
            gw2.fill(0.0);
            let mut gb2 = 0.0;
            for (i, row) in x.rows().enumerate() {
                let out = m.forward(row, &mut hidden);
                let delta = out - f64::from(y[i]);
                gb2 += delta;
                for k in 0..h {
                    gw2[k] += delta * hidden[k];
                    if hidden[k] > 0.0 {
                        let dh = delta * m.w2[k];
                        gb1[k] += dh;
                        for (g, v) in gw1[k * d..(k + 1) * d].iter_mut().zip(row) {
                            *g += dh * v;
                        }
                    }
                }
            }
            let s = config.learning_rate / n as f64;
            for (w, g) in m.w1.iter_mut().zip(&gw1) {
                *w -= s * g;
            }
            for (w, g) in m.b1.iter_mut().zip(&gb1) {
                *w -= s * g;
            }
            for (w, g) in m.w2.iter_mut().zip(&gw2) {
                *w -= s * g;
            }
            m.b2 -= s * gb2;
        }
        Ok(m)
    }

    fn forward(&self, row: &[f64], hidden: &mut [f64]) -> f64 {
        let mut z = self.b2;
        for (k, hk) in hidden.iter_mut().enumerate() {
            let a = dot(&self.w1[k * self.d..(k + 1) * self.d], row) + self.b1[k];
            *hk = a.max(0.0);
            z += self.w2[k] * *hk;
        }
        sigmoid(z)
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        let mut hidden = vec![0.0; self.b1.len()];
        x.rows().map(|r| self.forward(r, &mut hidden)).collect()
    }
}
