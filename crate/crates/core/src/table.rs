//! The canonical time-ordered telemetry table.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryTable {
    pub time_us: Vec<i64>,
    pub feature_names: Vec<String>,
    /// Column-major feature storage, one vector per feature.
    pub columns: Vec<Vec<f64>>,
    /// Multiclass label: 0 normal, 1..=4 anomaly types.
    pub labels: Vec<u8>,
}

impl TelemetryTable {
    pub fn new(
        time_us: Vec<i64>,
        feature_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let n = time_us.len();
        if labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: labels.len(),
            });
        }
        if feature_names.len() != columns.len() {
            return Err(Error::Dimension {
                expected: feature_names.len(),
                got: columns.len(),
            });
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: c.len(),
            });
        }
        let mut t = Self {
            time_us,
            feature_names,
            columns,
            labels,
        };
        t.sort_by_time();
        Ok(t)
    }

    pub fn n_rows(&self) -> usize {
        self.time_us.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// `1` iff any fault is present.
    pub fn binary_labels(&self) -> Vec<u8> {
        self.labels.iter().map(|&l| u8::from(l != 0)).collect()
    }

    pub fn is_sorted(&self) -> bool {
        self.time_us.windows(2).all(|w| w[0] <= w[1])
    }

    /// Stable sort of all rows by TimeUS.
    pub fn sort_by_time(&mut self) {
        if self.is_sorted() {
            return;
        }
        let mut order: Vec<usize> = (0..self.n_rows()).collect();
        order.sort_by_key(|&i| self.time_us[i]);
        *self = self.select_rows(&order);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.column_index(name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn select_rows(&self, idx: &[usize]) -> TelemetryTable {
        TelemetryTable {
            time_us: idx.iter().map(|&i| self.time_us[i]).collect(),
            feature_names: self.feature_names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> TelemetryTable {
        TelemetryTable {
            time_us: self.time_us.clone(),
            feature_names: idx.iter().map(|&j| self.feature_names[j].clone()).collect(),
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Keeps only rows whose multiclass label is in `keep`.
    pub fn filter_labels(&self, keep: &[u8]) -> TelemetryTable {
        let idx: Vec<usize> = (0..self.n_rows())
            .filter(|&i| keep.contains(&self.labels[i]))
            .collect();
        self.select_rows(&idx)
    }

    /// Row-major feature matrix for the given rows.
    pub fn feature_matrix(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_features());
        for &i in rows {
            data.extend(self.columns.iter().map(|c| c[i]));
        }
        Matrix::from_vec(rows.len(), self.n_features(), data).expect("consistent shape")
    }

    /// Canonical delimited text: `TimeUS`, features, then `label`.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(self.n_rows() * (self.n_features() + 2) * 12);
        s.push_str("TimeUS");
        for n in &self.feature_names {
            s.push(',');
            s.push_str(n);
        }
        s.push_str(",label\n");
        for i in 0..self.n_rows() {
            let _ = write!(s, "{}", self.time_us[i]);
            for c in &self.columns {
                // `{:?}` is the shortest repr that parses back to the same f64
                let _ = write!(s, ",{:?}", c[i]);
            }
            let _ = writeln!(s, ",{}", self.labels[i]);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text).map_err(|e| match e {
            Error::Parse { msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let perr = |msg: String| Error::Parse {
            path: "<table>".into(),
            msg,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| perr("empty table".into()))?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        if names.len() < 2 || names[0] != "TimeUS" || names[names.len() - 1] != "label" {
            return Err(Error::Schema(
                "table header must start with TimeUS and end with label".into(),
            ));
        }
        let feature_names: Vec<String> = names[1..names.len() - 1].iter().map(|s| s.to_string()).collect();
        let nf = feature_names.len();
        let mut time_us = Vec::new();
        let mut columns = vec![Vec::new(); nf];
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != nf + 2 {
                return Err(perr(format!(
                    "row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    nf + 2
                )));
            }
            time_us.push(
                fields[0]
                    .parse::<i64>()
                    .map_err(|e| perr(format!("row {}: TimeUS: {e}", lineno + 2)))?,
            );
            for (j, col) in columns.iter_mut().enumerate() {
                col.push(
                    fields[j + 1]
                        .parse::<f64>()
                        .map_err(|e| perr(format!("row {}: {}: {e}", lineno + 2, feature_names[j])))?,
                );
            }
            labels.push(
                fields[nf + 1]
                    .parse::<u8>()
                    .map_err(|e| perr(format!("row {}: label: {e}", lineno + 2)))?,
            );
        }
        Self::new(time_us, feature_names, columns, labels)
    }
}

/// Splits sorted timestamps into episodes wherever consecutive samples are
/// more than `gap_us` apart. Returns half-open row ranges.
pub fn detect_episodes(time_us: &[i64], gap_us: i64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    if time_us.is_empty() {
        return out;
    }
    let mut start = 0;
    for i in 1..time_us.len() {
        if time_us[i] - time_us[i - 1] > gap_us {
            out.push(start..i);
            start = i;
        }
    }
    out.push(start..time_us.len());
    out
}
