use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Quantile with linear interpolation between order statistics
/// (position `q * (n - 1)` in the sorted sample).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn sorted_column(m: &Matrix, j: usize) -> Vec<f64> {
    let mut c = m.column(j);
    c.sort_by(f64::total_cmp);
    c
}

/// Median / IQR scaler fitted on the training fold.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustScalerFit {
    pub median: Vec<f64>,
    pub iqr: Vec<f64>,
}

impl RobustScalerFit {
    pub fn fit(train: &Matrix) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("robust scaler training fold"));
        }
        let mut median = Vec::with_capacity(train.n_cols());
        let mut iqr = Vec::with_capacity(train.n_cols());
        for j in 0..train.n_cols() {
            let c = sorted_column(train, j);
            median.push(quantile_sorted(&c, 0.5));
            iqr.push((quantile_sorted(&c, 0.75) - quantile_sorted(&c, 0.25)).max(0.0));
        }
        Ok(Self { median, iqr })
    }

    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        if m.n_cols() != self.median.len() {
            return Err(Error::Dimension {
                expected: self.median.len(),
                got: m.n_cols(),
            });
        }
        let mut out = m.clone();
        for i in 0..out.n_rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let div = if self.iqr[j] > 0.0 { self.iqr[j] } else { 1.0 };
                *v = (*v - self.median[j]) / div;
            }
        }
        Ok(out)
    }
}

/// Fits on `train` and transforms `train` followed by every matrix in `others`.
pub fn robust_fit_transform(train: &Matrix, others: &[&Matrix]) -> Result<(RobustScalerFit, Vec<Matrix>)> {
    let fit = RobustScalerFit::fit(train)?;
    let mut out = vec![fit.transform(train)?];
    for m in others {
        out.push(fit.transform(m)?);
    }
    Ok((fit, out))
}

/// Min/max map onto `[-pi, pi]`, clipped outside the training range.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleScalerFit {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl AngleScalerFit {
    pub fn fit(train: &Matrix) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("angle scaler training fold"));
        }
        let mut min = vec![f64::INFINITY; train.n_cols()];
        let mut max = vec![f64::NEG_INFINITY; train.n_cols()];
        for r in train.rows() {
            for (j, &v) in r.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        if m.n_cols() != self.min.len() {
            return Err(Error::Dimension {
                expected: self.min.len(),
                got: m.n_cols(),
            });
        }
        let mut out = m.clone();
        for i in 0..out.n_rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let span = self.max[j] - self.min[j];
                *v = if span > 0.0 {
                    (-PI + 2.0 * PI * (*v - self.min[j]) / span).clamp(-PI, PI)
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }
}

pub fn angle_fit_transform(train: &Matrix, others: &[&Matrix]) -> Result<(AngleScalerFit, Vec<Matrix>)> {
    let fit = AngleScalerFit::fit(train)?;
    let mut out = vec![fit.transform(train)?];
    for m in others {
        out.push(fit.transform(m)?);
    }
    Ok((fit, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_columns(&[v.to_vec()]).unwrap()
    }

    #[test]
    fn robust_hand_example() {
        let train = col(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let test = col(&[100.0]);
        let (fit, out) = robust_fit_transform(&train, &[&test]).unwrap();
        assert_eq!(fit.median, vec![3.0]);
        assert_eq!(fit.iqr, vec![2.0]);
        assert_eq!(out[0].get(4, 0), 1.0);
        assert_eq!(out[1].get(0, 0), 48.5);
    }

    #[test]
    fn robust_constant_column() {
        let (_, out) = robust_fit_transform(&col(&[7.0; 4]), &[]).unwrap();
        assert!(out[0].as_slice().iter().all(|&v| v == 0.0));
        assert!(RobustScalerFit::fit(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
        assert_eq!(quantile_sorted(&[4.0], 0.9), 4.0);
    }

    #[test]
    fn angle_examples() {
        let train = col(&[0.0, 10.0, 5.0]);
        let test = col(&[12.0, -3.0]);
        let (_, out) = angle_fit_transform(&train, &[&test]).unwrap();
        assert_eq!(out[0].column(0), vec![-PI, PI, 0.0]);
        assert_eq!(out[1].column(0), vec![PI, -PI]);
        let (_, out) = angle_fit_transform(&col(&[2.0, 2.0]), &[&col(&[9.0])]).unwrap();
        assert_eq!(out[1].get(0, 0), 0.0);
        assert!(AngleScalerFit::fit(&Matrix::zeros(0, 1)).is_err());
    }
}
