//! SMOTE oversampling followed by Tomek-link cleaning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Real,
    Synthetic,
}

/// Balanced training fold. `source_rows[i]` is the input row a real sample
/// came from; synthetic samples have `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedFold {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub origin: Vec<Origin>,
    pub source_rows: Vec<Option<usize>>,
}

impl BalancedFold {
    /// Wraps an already balanced fold without resampling.
    pub fn from_real(x: Matrix, y: Vec<u8>) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::Dimension {
                expected: x.n_rows(),
                got: y.len(),
            });
        }
        let n = y.len();
        Ok(Self {
            x,
            y,
            origin: vec![Origin::Real; n],
            source_rows: (0..n).map(Some).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.y.iter().filter(|&&v| v == 1).count();
        [self.y.len() - ones, ones]
    }

    pub fn n_synthetic(&self) -> usize {
        self.origin.iter().filter(|&&o| o == Origin::Synthetic).count()
    }

    fn select(&self, keep: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(keep),
            y: keep.iter().map(|&i| self.y[i]).collect(),
            origin: keep.iter().map(|&i| self.origin[i]).collect(),
            source_rows: keep.iter().map(|&i| self.source_rows[i]).collect(),
        }
    }
}

pub fn smote_interpolate(x: &[f64], neighbour: &[f64], u: f64) -> Vec<f64> {
    x.iter().zip(neighbour).map(|(a, b)| a + u * (b - a)).collect()
}

/// Indices (into `candidates`) of the `k` nearest candidates to `query`,
/// excluding `exclude`. Ties go to the lower candidate position.
fn k_nearest(x: &Matrix, query: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let q = x.row(query);
    let mut d: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != query)
        .map(|(pos, &c)| (sq_dist(q, x.row(c)), pos))
        .collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().map(|(_, pos)| pos).collect()
}

/// Nearest neighbour of every row (self excluded, ties to the lowest index).
pub fn nearest_neighbours(x: &Matrix) -> Vec<Option<usize>> {
    (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let r = x.row(i);
            let mut best: Option<(f64, usize)> = None;
            for j in 0..x.n_rows() {
                if j == i {
                    continue;
                }
                let d = sq_dist(r, x.row(j));
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, j));
                }
            }
            best.map(|(_, j)| j)
        })
        .collect()
}

/// Opposite-label pairs `(a, b)`, `a < b`, that are mutual nearest neighbours.
pub fn tomek_links(x: &Matrix, y: &[u8]) -> Vec<(usize, usize)> {
    let nn = nearest_neighbours(x);
    let mut links = Vec::new();
    for (a, nb) in nn.iter().enumerate() {
        if let Some(b) = *nb {
            if a < b && y[a] != y[b] && nn[b] == Some(a) {
                links.push((a, b));
            }
        }
    }
    links
}

fn validate_fold(x: &Matrix, y: &[u8]) -> Result<[Vec<usize>; 2]> {
    if x.n_rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("training fold"));
    }
    let idx0: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0).collect();
    let idx1: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1).collect();
    if idx0.len() + idx1.len() != y.len() {
        return Err(Error::InvalidArgument("labels must be binary".into()));
    }
    if idx0.is_empty() || idx1.is_empty() {
        return Err(Error::SingleClass("training fold"));
    }
    Ok([idx0, idx1])
}

/// Oversamples the minority class to the majority count by SMOTE.
pub fn smote(x: &Matrix, y: &[u8], k: usize, seed: u64) -> Result<BalancedFold> {
    let [idx0, idx1] = validate_fold(x, y)?;
    let (minority, majority_len, min_label) = if idx1.len() <= idx0.len() {
        (idx1, idx0.len(), 1u8)
    } else {
        (idx0, idx1.len(), 0u8)
    };
    if minority.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "minority class has {} row(s); SMOTE needs at least 2",
            minority.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("SMOTE k must be >= 1".into()));
    }
    let k = k.min(minority.len() - 1);
    let neighbours: Vec<Vec<usize>> = minority
        .par_iter()
        .map(|&i| k_nearest(x, i, &minority, k))
        .collect();

    let mut fold = BalancedFold::from_real(x.clone(), y.to_vec())?;
    let n_new = majority_len - minority.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_new {
        let base = rng.random_range(0..minority.len());
        let nb = neighbours[base][rng.random_range(0..neighbours[base].len())];
        let u: f64 = rng.random();
        let row = smote_interpolate(x.row(minority[base]), x.row(minority[nb]), u);
        fold.x.push_row(&row)?;
        fold.y.push(min_label);
        fold.origin.push(Origin::Synthetic);
        fold.source_rows.push(None);
    }
    Ok(fold)
}

/// Removes both members of every Tomek link.
pub fn tomek_clean(fold: &BalancedFold) -> BalancedFold {
    let links = tomek_links(&fold.x, &fold.y);
    let mut drop = vec![false; fold.len()];
    for (a, b) in links {
        drop[a] = true;
        drop[b] = true;
    }
    let keep: Vec<usize> = (0..fold.len()).filter(|&i| !drop[i]).collect();
    fold.select(&keep)
}

/// SMOTE to the majority count, then Tomek-link removal.
pub fn smote_tomek(x: &Matrix, y: &[u8], k: usize, seed: u64) -> Result<BalancedFold> {
    let fold = smote(x, y, k, seed)?;
    Ok(tomek_clean(&fold))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_midpoint() {
        assert_eq!(smote_interpolate(&[0.0, 0.0], &[1.0, 1.0], 0.5), vec![0.5, 0.5]);
    }

    #[test]
    fn two_point_minority_stays_on_segment() {
        // minority {(0,0),(1,1)} with k=1: every synthetic point lies on the segment
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [5.0, 0.0], [5.0, 1.0], [6.0, 0.0], [6.0, 1.0]]).unwrap();
        let y = [1, 1, 0, 0, 0, 0];
        let f = smote(&x, &y, 1, 9).unwrap();
        assert_eq!(f.class_counts(), [4, 4]);
        for i in 6..8 {
            let r = f.x.row(i);
            assert_eq!(f.origin[i], Origin::Synthetic);
            assert!((r[0] - r[1]).abs() < 1e-15 && (0.0..=1.0).contains(&r[0]));
        }
    }

    #[test]
    fn tomek_pair_removed() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]]).unwrap();
        let y = [0, 1, 0];
        assert_eq!(tomek_links(&x, &y), vec![(0, 1)]);
        let f = tomek_clean(&BalancedFold::from_real(x, y.to_vec()).unwrap());
        assert_eq!(f.len(), 1);
        assert_eq!(f.source_rows, vec![Some(2)]);
    }

    #[test]
    fn errors() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert!(matches!(smote(&x, &[0, 0, 0], 5, 0), Err(Error::SingleClass(_))));
        assert!(smote(&x, &[0, 0, 1], 5, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let x = Matrix::from_rows(&(0..20).map(|i| [i as f64, (i * i % 7) as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i % 5 == 0)).collect();
        assert_eq!(smote_tomek(&x, &y, 5, 4).unwrap(), smote_tomek(&x, &y, 5, 4).unwrap());
        assert_ne!(smote(&x, &y, 5, 4).unwrap().x, smote(&x, &y, 5, 5).unwrap().x);
    }
}
