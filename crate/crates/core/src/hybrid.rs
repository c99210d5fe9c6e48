//! Paired feature expansions `T` and the boosted head trained on `X || T(X)`.
//!
//! All six variants of one (seed, mode) run see the same `X`, the same head
//! subset `B` and the same head configuration; only `T` differs. Learned
//! transforms (PCA basis, trained DRU) are fitted on subset `A`, which is
//! disjoint from `B`.

use std::collections::HashSet;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dru::{self, DruModel, DruSpec, FitReport, TrainBudget};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::models::{Gbdt, GbdtConfig};

/// Width of the random Fourier map; matches the DRU readout width.
pub const RBF_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridKind {
    Raw,
    Pca,
    Poly2,
    RandomRbf,
    DruUntrained,
    DruTrained,
}

impl HybridKind {
    pub const ALL: [HybridKind; 6] = [
        HybridKind::Raw,
        HybridKind::Pca,
        HybridKind::Poly2,
        HybridKind::RandomRbf,
        HybridKind::DruUntrained,
        HybridKind::DruTrained,
    ];

    /// Model name used in result files.
    pub fn model_name(&self) -> &'static str {
        match self {
            HybridKind::Raw => "hyb_raw",
            HybridKind::Pca => "hyb_pca",
            HybridKind::Poly2 => "hyb_poly2",
            HybridKind::RandomRbf => "hyb_random_rbf",
            HybridKind::DruUntrained => "hyb_dru_untrained",
            HybridKind::DruTrained => "hyb_dru_trained",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Components as rows, by descending explained variance.
    pub components: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl Pca {
    /// Keeps all components of the centered training data.
    pub fn fit(x: &Matrix) -> Result<Self> {
        let (n, d) = (x.n_rows(), x.n_cols());
        if n < 2 {
            return Err(Error::InvalidArgument("PCA needs at least two rows".into()));
        }
        let mut mean = vec![0.0; d];
        for r in x.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for r in x.rows() {
            for a in 0..d {
                let da = r[a] - mean[a];
                for b in a..d {
                    cov[(a, b)] += da * (r[b] - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[(a, b)] / (n - 1) as f64;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut components = Vec::with_capacity(d);
        let mut variances = Vec::with_capacity(d);
        for &k in &order {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            // sign convention: largest-magnitude entry positive
            let pivot = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map_or(0, |(i, _)| i);
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|c| *c = -*c);
            }
            components.push(v);
            variances.push(eig.eigenvalues[k].max(0.0));
        }
        Ok(Self {
            mean,
            components,
            variances,
        })
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.n_rows(), self.components.len());
        let mut centered = vec![0.0; self.mean.len()];
        for i in 0..x.n_rows() {
            for ((c, v), m) in centered.iter_mut().zip(x.row(i)).zip(&self.mean) {
                *c = v - m;
            }
            for (k, comp) in self.components.iter().enumerate() {
                out.set(i, k, dot(&centered, comp));
            }
        }
        out
    }

    /// Maps projections back to centered input space.
    pub fn inverse_transform_centered(&self, z: &Matrix) -> Matrix {
        let d = self.mean.len();
        let mut out = Matrix::zeros(z.n_rows(), d);
        for i in 0..z.n_rows() {
            for (k, comp) in self.components.iter().enumerate() {
                let s = z.get(i, k);
                for (j, c) in comp.iter().enumerate() {
                    out.set(i, j, out.get(i, j) + s * c);
                }
            }
        }
        out
    }
}

/// `sqrt(2/D) cos(W x + b)` with `W ~ N(0, I)`, `b ~ U(0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomRbf {
    pub weights: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

impl RandomRbf {
    pub fn draw(input_dim: usize, output_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0f0e_0d0c);
        let weights = (0..output_dim)
            .map(|_| (0..input_dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let offsets = (0..output_dim).map(|_| rng.random_range(0.0..TAU)).collect();
        Self { weights, offsets }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let scale = (2.0 / self.weights.len() as f64).sqrt();
        let mut out = Matrix::zeros(x.n_rows(), self.weights.len());
        for i in 0..x.n_rows() {
            for (k, (w, b)) in self.weights.iter().zip(&self.offsets).enumerate() {
                out.set(i, k, scale * (dot(w, x.row(i)) + b).cos());
            }
        }
        out
    }
}

/// Squares first, then cross products `x_i x_j` for `i < j`.
pub fn poly2_row(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    out.extend(x.iter().map(|v| v * v));
    for i in 0..d {
        for j in i + 1..d {
            out.push(x[i] * x[j]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum TransformState {
    Raw,
    Pca(Pca),
    Poly2,
    RandomRbf(RandomRbf),
    Dru(DruModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridTransform {
    pub kind: HybridKind,
    input_dim: usize,
    state: TransformState,
}

impl HybridTransform {
    pub fn output_dim(&self) -> usize {
        let d = self.input_dim;
        match &self.state {
            TransformState::Raw => d,
            TransformState::Pca(p) => p.components.len(),
            TransformState::Poly2 => d * (d + 1) / 2,
            TransformState::RandomRbf(r) => r.weights.len(),
            TransformState::Dru(m) => m.spec.n_qubits,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn raw(input_dim: usize) -> Self {
        Self {
            kind: HybridKind::Raw,
            input_dim,
            state: TransformState::Raw,
        }
    }

    pub fn poly2(input_dim: usize) -> Self {
        Self {
            kind: HybridKind::Poly2,
            input_dim,
            state: TransformState::Poly2,
        }
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.n_cols() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: x.n_cols(),
            });
        }
        Ok(match &self.state {
            TransformState::Raw => x.clone(),
            TransformState::Pca(p) => p.transform(x),
            TransformState::Poly2 => {
                let rows: Vec<Vec<f64>> = x.rows().map(poly2_row).collect();
                if rows.is_empty() {
                    Matrix::zeros(0, self.output_dim())
                } else {
                    Matrix::from_rows(&rows)?
                }
            }
            TransformState::RandomRbf(r) => r.transform(x),
            TransformState::Dru(m) => m.feature_matrix(x)?,
        })
    }

    /// `[X | T(X)]`.
    pub fn augment(&self, x: &Matrix) -> Result<Matrix> {
        x.hstack(&self.transform(x)?)
    }

    pub fn dru_model(&self) -> Option<&DruModel> {
        match &self.state {
            TransformState::Dru(m) => Some(m),
            _ => None,
        }
    }
}

/// Row indices into the balanced training fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSplit {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

/// Seeded 50/50 split of each class; `A` is then capped at `max_per_class_a`
/// rows per class (the cut rows are left unused).
pub fn split_ab(y: &[u8], seed: u64, max_per_class_a: usize) -> SubsetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xab_ab_ab);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let half = idx.len() / 2;
        a.extend(idx[..half].iter().take(max_per_class_a));
        b.extend_from_slice(&idx[half..]);
    }
    a.sort_unstable();
    b.sort_unstable();
    SubsetSplit { a, b }
}

pub struct HybridFamily {
    pub transforms: Vec<HybridTransform>,
    pub dru_report: FitReport,
}

impl HybridFamily {
    pub fn get(&self, kind: HybridKind) -> &HybridTransform {
        self.transforms
            .iter()
            .find(|t| t.kind == kind)
            .expect("family holds every kind")
    }

    pub fn dru_trained(&self) -> &DruModel {
        self.get(HybridKind::DruTrained).dru_model().expect("DRU transform")
    }
}

/// Fits all six transforms. `x` is the angle-scaled balanced fold; only rows in
/// `split.a` are used for fitting.
pub fn fit_transform_family(
    x: &Matrix,
    y: &[u8],
    split: &SubsetSplit,
    seed: u64,
    dru_spec: DruSpec,
    budget: &TrainBudget,
) -> Result<HybridFamily> {
    let b_set: HashSet<usize> = split.b.iter().copied().collect();
    let overlap = split.a.iter().filter(|i| b_set.contains(i)).count();
    if overlap > 0 {
        return Err(Error::SubsetOverlap(overlap));
    }
    if x.n_cols() != dru_spec.n_qubits {
        return Err(Error::Dimension {
            expected: dru_spec.n_qubits,
            got: x.n_cols(),
        });
    }
    let d = x.n_cols();
    let xa = x.select_rows(&split.a);
    let ya: Vec<u8> = split.a.iter().map(|&i| y[i]).collect();

    let spec = dru_spec.with_seed(seed);
    let (trained, mut report) = dru::fit_with_report(spec, &xa, &ya, budget)?;
    // report rows in terms of the full fold
    report.training_rows = report.training_rows.iter().map(|&r| split.a[r]).collect();
    // untrained map uses its own draw so it is not the trained model's start point
    let untrained = DruModel::untrained(spec.with_seed(seed.wrapping_add(0x9e37_79b9)))?;

    let transforms = vec![
        HybridTransform::raw(d),
        HybridTransform {
            kind: HybridKind::Pca,
            input_dim: d,
            state: TransformState::Pca(Pca::fit(&xa)?),
        },
        HybridTransform::poly2(d),
        HybridTransform {
            kind: HybridKind::RandomRbf,
            input_dim: d,
            state: TransformState::RandomRbf(RandomRbf::draw(d, RBF_DIM, seed)),
        },
        HybridTransform {
            kind: HybridKind::DruUntrained,
            input_dim: d,
            state: TransformState::Dru(untrained),
        },
        HybridTransform {
            kind: HybridKind::DruTrained,
            input_dim: d,
            state: TransformState::Dru(trained),
        },
    ];
    Ok(HybridFamily {
        transforms,
        dru_report: report,
    })
}

/// Trains the boosted head on `[X_B | T(X_B)]` and scores `[X_eval | T(X_eval)]`.
pub fn hybrid_fit_predict(
    transform: &HybridTransform,
    gbdt: &GbdtConfig,
    x_b: &Matrix,
    y_b: &[u8],
    x_eval: &Matrix,
) -> Result<Vec<f64>> {
    let train = transform.augment(x_b)?;
    let eval = transform.augment(x_eval)?;
    let head = Gbdt::fit(gbdt, &train, y_b)?;
    Ok(head.predict_proba(&eval))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_and_poly2_maps() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap();
        assert_eq!(HybridTransform::raw(5).transform(&x).unwrap(), x);
        assert_eq!(poly2_row(&[1.0, 2.0]), vec![1.0, 4.0, 2.0]);
        let p = HybridTransform::poly2(5);
        assert_eq!(p.output_dim(), 15);
        assert_eq!(p.augment(&x).unwrap().n_cols(), 20);
        assert_eq!(HybridTransform::raw(5).augment(&x).unwrap().n_cols(), 10);
        assert!(p.transform(&Matrix::zeros(1, 4)).is_err());
    }

    #[test]
    fn rbf_is_bounded_and_seeded() {
        let x = Matrix::from_rows(&(0..50).map(|i| [i as f64 * 0.1 - 2.0; 5]).collect::<Vec<_>>()).unwrap();
        let r = RandomRbf::draw(5, RBF_DIM, 4);
        let bound = (2.0f64 / 5.0).sqrt();
        assert!(r.transform(&x).as_slice().iter().all(|v| v.abs() <= bound + 1e-15));
        assert_eq!(r, RandomRbf::draw(5, RBF_DIM, 4));
        assert_ne!(r, RandomRbf::draw(5, RBF_DIM, 5));
    }

    #[test]
    fn split_ab_is_disjoint_and_capped() {
        let y: Vec<u8> = (0..1000).map(|i| u8::from(i % 2 == 0)).collect();
        let s = split_ab(&y, 1, 100);
        let a: HashSet<_> = s.a.iter().collect();
        assert!(s.b.iter().all(|i| !a.contains(i)));
        assert_eq!(s.a.iter().filter(|&&i| y[i] == 1).count(), 100);
        assert_eq!(s.b.len(), 500);
    }

    #[test]
    fn overlapping_subsets_rejected() {
        let x = Matrix::zeros(4, 5);
        let split = SubsetSplit {
            a: vec![0, 1],
            b: vec![1, 2],
        };
        let r = fit_transform_family(&x, &[0, 1, 0, 1], &split, 0, DruSpec::default(), &TrainBudget::default());
        assert!(matches!(r, Err(Error::SubsetOverlap(1))));
    }
}
