//! Reference implementations used as test oracles. None of these share code
//! with the library: circuits are dense Kronecker products, metrics are
//! explicit counts, trees are exhaustive recursive searches.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use uavq_core::qsim::Gate;
use uavq_core::Matrix;

pub type Dense = Vec<Vec<Complex64>>;
type Op2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

const I2: Op2 = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];

fn pauli(axis: char) -> Op2 {
    match axis {
        'x' => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        'y' => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        'z' => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
        _ => unreachable!(),
    }
}

/// `exp(-i a P / 2) = cos(a/2) I - i sin(a/2) P`.
fn rotation(axis: char, angle: f64) -> Op2 {
    let p = pauli(axis);
    let (co, si) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let mut r = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = I2[i][j] * co - c(0.0, 1.0) * si * p[i][j];
        }
    }
    r
}

fn to_dense(op: &Op2) -> Dense {
    op.iter().map(|r| r.to_vec()).collect()
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == c(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn identity(dim: usize) -> Dense {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

/// `ops[q]` acts on qubit q. Qubit 0 is the least significant index bit, so
/// the product is written `ops[n-1] (x) ... (x) ops[0]`.
fn tensor(ops: &[Op2]) -> Dense {
    let mut m = to_dense(&ops[ops.len() - 1]);
    for q in (0..ops.len() - 1).rev() {
        m = kron(&m, &to_dense(&ops[q]));
    }
    m
}

pub fn single_qubit(op: Op2, target: usize, n: usize) -> Dense {
    let ops: Vec<Op2> = (0..n).map(|q| if q == target { op } else { I2 }).collect();
    tensor(&ops)
}

/// `|0><0|_c (x) I + |1><1|_c (x) X_t`.
pub fn cnot_dense(control: usize, target: usize, n: usize) -> Dense {
    let p0 = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = [[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
    let keep: Vec<Op2> = (0..n).map(|q| if q == control { p0 } else { I2 }).collect();
    let flip: Vec<Op2> = (0..n)
        .map(|q| {
            if q == control {
                p1
            } else if q == target {
                pauli('x')
            } else {
                I2
            }
        })
        .collect();
    add(&tensor(&keep), &tensor(&flip))
}

pub fn gate_dense(g: &Gate, n: usize) -> Dense {
    match *g {
        Gate::Rx { target, angle } => single_qubit(rotation('x', angle), target, n),
        Gate::Ry { target, angle } => single_qubit(rotation('y', angle), target, n),
        Gate::Rz { target, angle } => single_qubit(rotation('z', angle), target, n),
        Gate::Cnot { control, target } => cnot_dense(control, target, n),
    }
}

/// Unitary of the whole circuit; the first gate acts first.
pub fn circuit_dense(gates: &[Gate], n: usize) -> Dense {
    gates
        .iter()
        .fold(identity(1 << n), |acc, g| matmul(&gate_dense(g, n), &acc))
}

pub fn apply_dense(u: &Dense, psi: &[Complex64]) -> Vec<Complex64> {
    u.iter()
        .map(|row| row.iter().zip(psi).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn basis_state(n: usize, index: usize) -> Vec<Complex64> {
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[index] = c(1.0, 0.0);
    v
}

pub fn expect_z_dense(psi: &[Complex64], qubit: usize, n: usize) -> f64 {
    let zpsi = apply_dense(&single_qubit(pauli('z'), qubit, n), psi);
    psi.iter().zip(&zpsi).map(|(a, b)| (a.conj() * b).re).sum()
}

pub fn random_gate(rng: &mut impl Rng, n: usize) -> Gate {
    let target = rng.random_range(0..n);
    let angle = rng.random_range(-2.0 * PI..2.0 * PI);
    match rng.random_range(0..4) {
        0 => Gate::Rx { target, angle },
        1 => Gate::Ry { target, angle },
        2 => Gate::Rz { target, angle },
        _ => {
            let mut control = rng.random_range(0..n - 1);
            if control >= target {
                control += 1;
            }
            Gate::Cnot { control, target }
        }
    }
}

pub fn random_circuit(rng: &mut impl Rng, n: usize, len: usize) -> Vec<Gate> {
    (0..len).map(|_| random_gate(rng, n)).collect()
}

// ---- metrics ----

pub fn counts(y: &[u8], p: &[u8], class: u8) -> (f64, f64, f64, f64) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &q) in y.iter().zip(p) {
        match (t == class, q == class) {
            (true, true) => tp += 1.0,
            (false, true) => fp += 1.0,
            (false, false) => tn += 1.0,
            (true, false) => fn_ += 1.0,
        }
    }
    (tp, fp, tn, fn_)
}

/// Per-class F1 as `2TP / (2TP + FP + FN)`, zero when the class is absent
/// from both sequences.
pub fn oracle_f1_macro(y: &[u8], p: &[u8]) -> f64 {
    let f1 = |class| {
        let (tp, fp, _, fn_) = counts(y, p, class);
        let den = 2.0 * tp + fp + fn_;
        if den == 0.0 {
            0.0
        } else {
            2.0 * tp / den
        }
    };
    (f1(0) + f1(1)) / 2.0
}

pub fn oracle_balanced_accuracy(y: &[u8], p: &[u8]) -> f64 {
    let recall = |class| {
        let (tp, _, _, fn_) = counts(y, p, class);
        if tp + fn_ == 0.0 {
            0.0
        } else {
            tp / (tp + fn_)
        }
    };
    (recall(0) + recall(1)) / 2.0
}

/// Pearson correlation of the two 0/1 sequences, 0 when either is constant.
pub fn oracle_mcc(y: &[u8], p: &[u8]) -> f64 {
    let n = y.len() as f64;
    let my = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let mp = p.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let (mut cov, mut vy, mut vp) = (0.0, 0.0, 0.0);
    for (&a, &b) in y.iter().zip(p) {
        let (da, db) = (f64::from(a) - my, f64::from(b) - mp);
        cov += da * db;
        vy += da * da;
        vp += db * db;
    }
    if vy == 0.0 || vp == 0.0 {
        0.0
    } else {
        cov / (vy * vp).sqrt()
    }
}

pub fn oracle_far(y: &[u8], p: &[u8]) -> Option<f64> {
    let normals: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0).collect();
    if normals.is_empty() {
        return None;
    }
    Some(normals.iter().filter(|&&i| p[i] == 1).count() as f64 / normals.len() as f64)
}

/// Fraction of (positive, negative) pairs ordered correctly, ties one half.
pub fn oracle_auc(y: &[u8], s: &[f64]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in (0..y.len()).filter(|&i| y[i] == 1) {
        for j in (0..y.len()).filter(|&j| y[j] == 0) {
            pairs += 1.0;
            if s[i] > s[j] {
                wins += 1.0;
            } else if s[i] == s[j] {
                wins += 0.5;
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

pub fn bits(mask: u32, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((mask >> i) & 1) as u8).collect()
}

// ---- trees ----

#[derive(Debug)]
pub enum OracleTree {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<OracleTree>,
        right: Box<OracleTree>,
    },
}

impl OracleTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            OracleTree::Leaf(v) => *v,
            OracleTree::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

fn sse(t: &[f64], rows: &[usize]) -> f64 {
    let m = rows.iter().map(|&i| t[i]).sum::<f64>() / rows.len() as f64;
    rows.iter().map(|&i| (t[i] - m) * (t[i] - m)).sum()
}

/// Every (feature, midpoint) candidate with its two-pass SSE reduction, in
/// feature then threshold order.
pub fn oracle_candidates(x: &[Vec<f64>], t: &[f64], rows: &[usize], min_leaf: usize) -> Vec<(usize, f64, f64)> {
    let parent = sse(t, rows);
    let mut out = Vec::new();
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|&i| x[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= thr);
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            out.push((f, thr, parent - sse(t, &l) - sse(t, &r)));
        }
    }
    out
}

/// Exhaustive recursive regression tree; first strictly best candidate wins.
pub fn oracle_tree(x: &[Vec<f64>], t: &[f64], rows: &[usize], depth: usize, max_depth: Option<usize>, min_leaf: usize) -> OracleTree {
    let mean = rows.iter().map(|&i| t[i]).sum::<f64>() / rows.len() as f64;
    if max_depth.is_some_and(|m| depth >= m) || rows.len() < 2 * min_leaf {
        return OracleTree::Leaf(mean);
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for cand in oracle_candidates(x, t, rows, min_leaf) {
        if cand.2 > 1e-12 && best.is_none_or(|b| cand.2 > b.2) {
            best = Some(cand);
        }
    }
    match best {
        None => OracleTree::Leaf(mean),
        Some((feature, threshold, _)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][feature] <= threshold);
            OracleTree::Split {
                feature,
                threshold,
                left: Box::new(oracle_tree(x, t, &l, depth + 1, max_depth, min_leaf)),
                right: Box::new(oracle_tree(x, t, &r, depth + 1, max_depth, min_leaf)),
            }
        }
    }
}

// ---- data ----

pub fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.rows().map(<[f64]>::to_vec).collect()
}

/// Two clusters in 5-dimensional angle space separated by pi in feature 0.
pub fn separable_task(n_per_class: usize, seed: u64) -> (Matrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 0.25).unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for class in [0u8, 1] {
        let centre = if class == 0 { -PI / 2.0 } else { PI / 2.0 };
        for _ in 0..n_per_class {
            let mut r = vec![(centre + jitter.sample(&mut rng)).clamp(-PI, PI)];
            r.extend((0..4).map(|_| rng.random_range(-1.0..1.0)));
            rows.push(r);
            y.push(class);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

/// Plain gradient-descent logistic regression.
pub fn oracle_logreg_accuracy(x: &Matrix, y: &[u8], x_eval: &Matrix, y_eval: &[u8]) -> f64 {
    let d = x.n_cols();
    let mut w = vec![0.0; d + 1];
    for _ in 0..2000 {
        let mut g = vec![0.0; d + 1];
        for (row, &t) in x.rows().zip(y) {
            let z = w[d] + row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let e = 1.0 / (1.0 + (-z).exp()) - f64::from(t);
            for j in 0..d {
                g[j] += e * row[j];
            }
            g[d] += e;
        }
        for j in 0..=d {
            w[j] -= 0.5 * g[j] / y.len() as f64;
        }
    }
    let hits = x_eval
        .rows()
        .zip(y_eval)
        .filter(|(row, &t)| {
            let z = w[d] + row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            u8::from(z > 0.0) == t
        })
        .count();
    hits as f64 / y_eval.len() as f64
}

pub fn accuracy(pred: &[u8], y: &[u8]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}
