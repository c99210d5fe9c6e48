//! Data re-uploading (DRU) variational classifier.
//!
//! Each layer re-encodes the input additively into trainable rotations:
//! qubit `q` in layer `l` receives `RX(t[l,q,0] + x[q])`, `RY(t[l,q,1] + x[q])`,
//! `RZ(t[l,q,2] + x[q])`, and every layer ends with one ring entangler. The
//! decision score is `(1 - <Z_0>) / 2`; the hybrid feature map is the same
//! quantity read on every qubit.

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::qsim::{ring_entangler, Gate, Statevector};

/// Half-width of the uniform initialization range for theta.
pub const INIT_HALF_WIDTH: f64 = PI / 8.0;

const ANGLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entanglement {
    Ring,
    /// No entangling layer; only meaningful for toy single-qubit circuits.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DruSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub entanglement: Entanglement,
    pub seed: u64,
}

impl Default for DruSpec {
    fn default() -> Self {
        Self {
            n_qubits: 5,
            n_layers: 2,
            entanglement: Entanglement::Ring,
            seed: 0,
        }
    }
}

impl DruSpec {
    pub fn new(n_qubits: usize, n_layers: usize, seed: u64) -> Self {
        Self {
            n_qubits,
            n_layers,
            entanglement: Entanglement::Ring,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn n_params(&self) -> usize {
        3 * self.n_qubits * self.n_layers
    }

    fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > crate::qsim::MAX_QUBITS {
            return Err(Error::QubitCount(self.n_qubits));
        }
        if self.n_layers == 0 {
            return Err(Error::InvalidArgument("DRU needs at least one layer".into()));
        }
        if self.entanglement == Entanglement::Ring && self.n_qubits < 2 {
            return Err(Error::InvalidArgument(
                "ring entanglement needs at least 2 qubits".into(),
            ));
        }
        Ok(())
    }

    /// Theta uniformly drawn from `(-pi/8, pi/8)` using `self.seed`.
    pub fn initial_theta(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_7e7a);
        (0..self.n_params())
            .map(|_| rng.random_range(-INIT_HALF_WIDTH..INIT_HALF_WIDTH))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subset {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainBudget {
    pub max_per_class: usize,
    pub max_optimizer_evals: usize,
    #[serde(skip)]
    pub subset_tag: Subset,
}

impl Default for TrainBudget {
    fn default() -> Self {
        Self {
            max_per_class: 400,
            max_optimizer_evals: 250,
            subset_tag: Subset::A,
        }
    }
}

impl Default for Subset {
    fn default() -> Self {
        Subset::A
    }
}

/// Gate sequence for one input. `theta` is laid out as `[layer][qubit][rx, ry, rz]`.
pub fn build_circuit(spec: &DruSpec, theta: &[f64], x: &[f64]) -> Result<Vec<Gate>> {
    spec.validate()?;
    if theta.len() != spec.n_params() {
        return Err(Error::Dimension {
            expected: spec.n_params(),
            got: theta.len(),
        });
    }
    if x.len() != spec.n_qubits {
        return Err(Error::Dimension {
            expected: spec.n_qubits,
            got: x.len(),
        });
    }
    if let Some(v) = x.iter().find(|v| !(v.abs() <= PI + ANGLE_SLACK)) {
        return Err(Error::InvalidArgument(format!(
            "input angle {v} outside [-pi, pi]"
        )));
    }
    let entangler = match spec.entanglement {
        Entanglement::Ring => ring_entangler(spec.n_qubits)?,
        Entanglement::None => Vec::new(),
    };
    let per_layer = 3 * spec.n_qubits + entangler.len();
    let mut gates = Vec::with_capacity(spec.n_layers * per_layer);
    for layer in 0..spec.n_layers {
        for (q, &xq) in x.iter().enumerate() {
            let t = &theta[(layer * spec.n_qubits + q) * 3..][..3];
            gates.push(Gate::Rx { target: q, angle: t[0] + xq });
            gates.push(Gate::Ry { target: q, angle: t[1] + xq });
            gates.push(Gate::Rz { target: q, angle: t[2] + xq });
        }
        gates.extend_from_slice(&entangler);
    }
    Ok(gates)
}

fn simulate(spec: &DruSpec, theta: &[f64], x: &[f64]) -> Result<Statevector> {
    let gates = build_circuit(spec, theta, x)?;
    let mut sv = Statevector::zero(spec.n_qubits)?;
    sv.apply_all(&gates)?;
    Ok(sv)
}

fn score_theta(spec: &DruSpec, theta: &[f64], x: &[f64]) -> Result<f64> {
    let z0 = simulate(spec, theta, x)?.expect_z(0)?;
    Ok(((1.0 - z0) / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DruModel {
    pub spec: DruSpec,
    pub theta: Vec<f64>,
    pub threshold: f64,
    pub trained: bool,
}

/// Diagnostics collected while fitting.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub n_evals: usize,
    /// Best loss seen after each objective evaluation.
    pub best_loss_trace: Vec<f64>,
    /// Row indices of the input matrix that formed the training subset.
    pub training_rows: Vec<usize>,
}

impl DruModel {
    /// Untrained model with theta drawn from `spec.seed`.
    pub fn untrained(spec: DruSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            theta: spec.initial_theta(),
            spec,
            threshold: 0.5,
            trained: false,
        })
    }

    pub fn with_theta(spec: DruSpec, theta: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if theta.len() != spec.n_params() {
            return Err(Error::Dimension {
                expected: spec.n_params(),
                got: theta.len(),
            });
        }
        Ok(Self {
            spec,
            theta,
            threshold: 0.5,
            trained: false,
        })
    }

    pub fn circuit(&self, x: &[f64]) -> Result<Vec<Gate>> {
        build_circuit(&self.spec, &self.theta, x)
    }

    /// `(1 - <Z_0>) / 2` on the encoded circuit.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        score_theta(&self.spec, &self.theta, x)
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.score(x)? >= self.threshold))
    }

    /// `(1 - <Z_q>) / 2` for every qubit.
    pub fn extract_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let sv = simulate(&self.spec, &self.theta, x)?;
        Ok(sv
            .expect_z_all()
            .into_iter()
            .map(|z| ((1.0 - z) / 2.0).clamp(0.0, 1.0))
            .collect())
    }

    pub fn score_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        (0..x.n_rows())
            .into_par_iter()
            .map(|i| self.score(x.row(i)))
            .collect()
    }

    pub fn feature_matrix(&self, x: &Matrix) -> Result<Matrix> {
        let rows: Vec<Vec<f64>> = (0..x.n_rows())
            .into_par_iter()
            .map(|i| self.extract_features(x.row(i)))
            .collect::<Result<_>>()?;
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, self.spec.n_qubits));
        }
        Matrix::from_rows(&rows)
    }

    /// Picks the threshold maximizing macro F1 on a validation fold.
    /// Candidates are midpoints between consecutive distinct scores; ties keep the
    /// candidate closest to 0.5.
    pub fn tune_threshold(&mut self, x_val: &Matrix, y_val: &[u8]) -> Result<()> {
        let scores = self.score_matrix(x_val)?;
        if scores.len() != y_val.len() {
            return Err(Error::Dimension {
                expected: scores.len(),
                got: y_val.len(),
            });
        }
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut best: (f64, f64) = (f64::NEG_INFINITY, 0.5);
        let mut candidates = vec![0.5];
        candidates.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        for t in candidates {
            if !(t > 0.0 && t < 1.0) {
                continue;
            }
            let yhat: Vec<u8> = scores.iter().map(|&s| u8::from(s >= t)).collect();
            let f1 = crate::metrics::f1_macro(y_val, &yhat)?;
            let better = f1 > best.0 || (f1 == best.0 && (t - 0.5).abs() < (best.1 - 0.5).abs());
            if better {
                best = (f1, t);
            }
        }
        self.threshold = best.1;
        Ok(())
    }

    /// Plain-text record; theta is written at full round-trip precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let ent = match self.spec.entanglement {
            Entanglement::Ring => "ring",
            Entanglement::None => "none",
        };
        let _ = writeln!(s, "n_qubits = {}", self.spec.n_qubits);
        let _ = writeln!(s, "n_layers = {}", self.spec.n_layers);
        let _ = writeln!(s, "entanglement = {ent}");
        let _ = writeln!(s, "seed = {}", self.spec.seed);
        let _ = writeln!(s, "threshold = {:?}", self.threshold);
        let _ = writeln!(s, "trained = {}", self.trained);
        let theta: Vec<String> = self.theta.iter().map(|t| format!("{t:?}")).collect();
        let _ = writeln!(s, "theta = {}", theta.join(","));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = DruSpec::default();
        let mut threshold = 0.5;
        let mut trained = false;
        let mut theta = None;
        let bad = |msg: String| Error::Parse {
            path: "<dru model>".into(),
            msg,
        };
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("missing `=` in `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num_err = |e: &dyn std::fmt::Display| bad(format!("{key}: {e}"));
            match key {
                "n_qubits" => spec.n_qubits = value.parse().map_err(|e| num_err(&e))?,
                "n_layers" => spec.n_layers = value.parse().map_err(|e| num_err(&e))?,
                "seed" => spec.seed = value.parse().map_err(|e| num_err(&e))?,
                "entanglement" => {
                    spec.entanglement = match value {
                        "ring" => Entanglement::Ring,
                        "none" => Entanglement::None,
                        other => return Err(bad(format!("unknown entanglement `{other}`"))),
                    }
                }
                "threshold" => threshold = value.parse().map_err(|e| num_err(&e))?,
                "trained" => trained = value.parse().map_err(|e| num_err(&e))?,
                "theta" => {
                    let t = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|v| v.trim().parse::<f64>())
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|e| num_err(&e))?
                    };
                    theta = Some(t);
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        let theta = theta.ok_or_else(|| bad("missing theta".into()))?;
        let mut m = DruModel::with_theta(spec, theta)?;
        m.threshold = threshold;
        m.trained = trained;
        Ok(m)
    }
}

/// Class-balanced training subset: up to `max_per_class` rows of each class,
/// chosen by a seeded shuffle and returned in ascending order.
pub fn balanced_subset(y: &[u8], max_per_class: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() > max_per_class {
            idx.shuffle(&mut rng);
            idx.truncate(max_per_class);
        }
        picked.extend(idx);
    }
    picked.sort_unstable();
    picked
}

fn mse_loss(spec: &DruSpec, theta: &[f64], x: &Matrix, y: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &t) in y.iter().enumerate() {
        // inputs were validated before optimization starts
        let s = score_theta(spec, theta, x.row(i)).unwrap_or(0.5);
        total += (s - t) * (s - t);
    }
    total / y.len() as f64
}

/// Fits theta by COBYLA on a class-balanced subset of `(x, y)`.
pub fn fit(spec: DruSpec, x: &Matrix, y: &[u8], budget: &TrainBudget) -> Result<DruModel> {
    fit_with_report(spec, x, y, budget).map(|(m, _)| m)
}

pub fn fit_with_report(
    spec: DruSpec,
    x: &Matrix,
    y: &[u8],
    budget: &TrainBudget,
) -> Result<(DruModel, FitReport)> {
    spec.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("DRU training set"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    if x.n_cols() != spec.n_qubits {
        return Err(Error::Dimension {
            expected: spec.n_qubits,
            got: x.n_cols(),
        });
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::SingleClass("DRU training labels"));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidArgument("DRU labels must be binary".into()));
    }
    if budget.max_per_class == 0 {
        return Err(Error::InvalidArgument("max_per_class must be >= 1".into()));
    }
    for row in x.rows() {
        build_circuit(&spec, &vec![0.0; spec.n_params()], row)?;
    }

    let rows = balanced_subset(y, budget.max_per_class, spec.seed);
    let xs = x.select_rows(&rows);
    let ys: Vec<f64> = rows.iter().map(|&i| f64::from(y[i])).collect();

    let theta0 = spec.initial_theta();
    let initial_loss = mse_loss(&spec, &theta0, &xs, &ys);

    // cobyla takes an `Fn` objective, so progress is tracked through a RefCell
    let tracker = RefCell::new((initial_loss, theta0.clone(), Vec::<f64>::new()));
    let objective = |t: &[f64], _: &mut ()| {
        let loss = mse_loss(&spec, t, &xs, &ys);
        let mut tr = tracker.borrow_mut();
        if loss < tr.0 {
            tr.0 = loss;
            tr.1.clear();
            tr.1.extend_from_slice(t);
        }
        let best = tr.0;
        tr.2.push(best);
        loss
    };
    let bounds = vec![(-2.0 * TAU, 2.0 * TAU); spec.n_params()];
    let no_cons: &[fn(&[f64], &mut ()) -> f64] = &[];
    let outcome = cobyla::minimize(
        objective,
        &theta0,
        &bounds,
        no_cons,
        (),
        budget.max_optimizer_evals.max(1),
        cobyla::RhoBeg::All(0.5),
        None,
    );
    if let Err((status, _, _)) = outcome {
        if matches!(
            status,
            cobyla::FailStatus::InvalidArgs | cobyla::FailStatus::OutOfMemory
        ) {
            return Err(Error::Optimizer(format!("{status:?}")));
        }
        // roundoff-limited and similar stops still leave a usable best point
    }
    let (final_loss, theta, trace) = tracker.into_inner();
    let model = DruModel {
        spec,
        theta,
        threshold: 0.5,
        trained: true,
    };
    let report = FitReport {
        initial_loss,
        final_loss,
        n_evals: trace.len(),
        best_loss_trace: trace,
        training_rows: rows,
    };
    Ok((model, report))
}
