//! Binary classification metrics and cross-seed aggregation.
//!
//! Class 1 (anomaly) is the positive class throughout. Metrics that are
//! undefined for a given input (AUC with one class present, FAR with no
//! normal rows) come back as `None` and are carried as missing values.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_labels(y: &[u8], yhat: &[u8]) -> Result<Self> {
        if y.len() != yhat.len() {
            return Err(Error::Dimension {
                expected: y.len(),
                got: yhat.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::Empty("label sequence"));
        }
        let mut c = Confusion::default();
        for (&t, &p) in y.iter().zip(yhat) {
            match (t != 0, p != 0) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Unweighted mean of the per-class F1 over classes {0, 1}.
pub fn f1_macro(y: &[u8], yhat: &[u8]) -> Result<f64> {
    let c = Confusion::from_labels(y, yhat)?;
    let f1_pos = f1(c.tp, c.fp, c.fn_);
    let f1_neg = f1(c.tn, c.fn_, c.fp);
    Ok(0.5 * (f1_pos + f1_neg))
}

/// Mean of per-class recalls.
pub fn balanced_accuracy(y: &[u8], yhat: &[u8]) -> Result<f64> {
    let c = Confusion::from_labels(y, yhat)?;
    Ok(0.5 * (ratio(c.tp, c.tp + c.fn_) + ratio(c.tn, c.tn + c.fp)))
}

/// Matthews correlation coefficient; a zero denominator yields 0.
pub fn mcc(y: &[u8], yhat: &[u8]) -> Result<f64> {
    let c = Confusion::from_labels(y, yhat)?;
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if den == 0.0 {
        Ok(0.0)
    } else {
        Ok(((tp * tn - fp * fn_) / den).clamp(-1.0, 1.0))
    }
}

/// False-alarm rate on the normal class, FP / (FP + TN).
pub fn far_normal(y: &[u8], yhat: &[u8]) -> Result<Option<f64>> {
    let c = Confusion::from_labels(y, yhat)?;
    if c.fp + c.tn == 0 {
        return Ok(None);
    }
    Ok(Some(ratio(c.fp, c.fp + c.tn)))
}

/// ROC AUC in the Mann-Whitney form, with ties between a positive and a
/// negative counting one half. Computed by average ranks in O(n log n).
pub fn roc_auc(y: &[u8], scores: &[f64]) -> Result<Option<f64>> {
    if y.len() != scores.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: scores.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("label sequence"));
    }
    let n_pos = y.iter().filter(|&&v| v != 0).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; a tie group shares the average rank
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if y[k] != 0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(Some(u / (p * n)))
}

/// One (seed, mode, model) result row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub seed: u64,
    pub mode: String,
    pub model: String,
    pub f1_macro: f64,
    pub roc_auc: Option<f64>,
    pub far_normal: Option<f64>,
    pub balanced_accuracy: f64,
    pub mcc: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub prior_train: f64,
    pub prior_test: f64,
}

pub const RESULTS_HEADER: &str =
    "seed,mode,model,f1_macro,roc_auc,far_normal,bal_acc,mcc,n_train,n_val,n_test,prior_train,prior_test";

pub const AGGREGATE_HEADER: &str = "model,mode,metric,mean,std,n_missing";

pub const METRIC_NAMES: [&str; 5] = ["f1_macro", "roc_auc", "far_normal", "bal_acc", "mcc"];

/// Split-level context attached to every record.
#[derive(Debug, Clone, Copy)]
pub struct SplitStats {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub prior_train: f64,
    pub prior_test: f64,
}

impl MetricsRecord {
    /// Scores thresholded at `threshold` on the evaluation labels.
    pub fn evaluate(
        seed: u64,
        mode: &str,
        model: &str,
        y: &[u8],
        scores: &[f64],
        threshold: f64,
        split: SplitStats,
    ) -> Result<Self> {
        let yhat: Vec<u8> = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
        Ok(Self {
            seed,
            mode: mode.to_string(),
            model: model.to_string(),
            f1_macro: f1_macro(y, &yhat)?,
            roc_auc: roc_auc(y, scores)?,
            far_normal: far_normal(y, &yhat)?,
            balanced_accuracy: balanced_accuracy(y, &yhat)?,
            mcc: mcc(y, &yhat)?,
            n_train: split.n_train,
            n_val: split.n_val,
            n_test: split.n_test,
            prior_train: split.prior_train,
            prior_test: split.prior_test,
        })
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "f1_macro" => Some(self.f1_macro),
            "roc_auc" => self.roc_auc,
            "far_normal" => self.far_normal,
            "bal_acc" => Some(self.balanced_accuracy),
            "mcc" => Some(self.mcc),
            _ => None,
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.mode,
            self.model,
            fmt_num(self.f1_macro),
            fmt_opt(self.roc_auc),
            fmt_opt(self.far_normal),
            fmt_num(self.balanced_accuracy),
            fmt_num(self.mcc),
            self.n_train,
            self.n_val,
            self.n_test,
            fmt_num(self.prior_train),
            fmt_num(self.prior_test),
        )
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 13 {
            return Err(Error::Schema(format!(
                "results row has {} fields, expected 13",
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Schema(format!("bad number `{s}`")))
        };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let int = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Schema(format!("bad integer `{s}`")))
        };
        Ok(Self {
            seed: f[0]
                .parse()
                .map_err(|_| Error::Schema(format!("bad seed `{}`", f[0])))?,
            mode: f[1].to_string(),
            model: f[2].to_string(),
            f1_macro: num(f[3])?,
            roc_auc: opt(f[4])?,
            far_normal: opt(f[5])?,
            balanced_accuracy: num(f[6])?,
            mcc: num(f[7])?,
            n_train: int(f[8])?,
            n_val: int(f[9])?,
            n_test: int(f[10])?,
            prior_train: num(f[11])?,
            prior_test: num(f[12])?,
        })
    }
}

/// Fixed-precision formatting keeps result files byte-stable.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator); missing with fewer than two values.
    pub std: Option<f64>,
    pub n: usize,
    pub n_missing: usize,
}

/// Mean and sample standard deviation of the present values.
pub fn summarize(values: &[Option<f64>]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Empty("aggregation group"));
    }
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let n_missing = values.len() - present.len();
    let n = present.len();
    let mean = (n > 0).then(|| present.iter().sum::<f64>() / n as f64);
    let std = match (mean, n) {
        (Some(m), n) if n >= 2 => {
            let ss: f64 = present.iter().map(|v| (v - m) * (v - m)).sum();
            Some((ss / (n - 1) as f64).sqrt())
        }
        _ => None,
    };
    Ok(Summary {
        mean,
        std,
        n,
        n_missing,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub model: String,
    pub mode: String,
    pub metric: String,
    pub summary: Summary,
}

impl AggregateRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.model,
            self.mode,
            self.metric,
            fmt_opt(self.summary.mean),
            fmt_opt(self.summary.std),
            self.summary.n_missing
        )
    }

    /// Inverse of [`AggregateRow::to_csv_row`]; `n` is not stored and is
    /// left at zero.
    pub fn from_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 6 {
            return Err(Error::Schema(format!(
                "aggregate row has {} fields, expected 6",
                f.len()
            )));
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| Error::Schema(format!("bad number `{s}`")))
        };
        Ok(Self {
            model: f[0].to_string(),
            mode: f[1].to_string(),
            metric: f[2].to_string(),
            summary: Summary {
                mean: opt(f[3])?,
                std: opt(f[4])?,
                n: 0,
                n_missing: f[5]
                    .parse()
                    .map_err(|_| Error::Schema(format!("bad count `{}`", f[5])))?,
            },
        })
    }
}

/// Groups records by (model, mode) and summarizes every metric.
///
/// Output order follows first appearance of each model and mode in `records`,
/// then the fixed metric order.
pub fn aggregate(records: &[MetricsRecord]) -> Result<Vec<AggregateRow>> {
    if records.is_empty() {
        return Err(Error::Empty("metrics records"));
    }
    let mut model_order: Vec<&str> = Vec::new();
    let mut mode_order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        let mi = position_or_push(&mut model_order, &r.model);
        let di = position_or_push(&mut mode_order, &r.mode);
        groups.entry((mi, di)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((mi, di), group) in groups {
        for metric in METRIC_NAMES {
            let values: Vec<Option<f64>> = group.iter().map(|r| r.metric(metric)).collect();
            out.push(AggregateRow {
                model: model_order[mi].to_string(),
                mode: mode_order[di].to_string(),
                metric: metric.to_string(),
                summary: summarize(&values)?,
            });
        }
    }
    Ok(out)
}

fn position_or_push<'a>(v: &mut Vec<&'a str>, s: &'a str) -> usize {
    match v.iter().position(|x| *x == s) {
        Some(i) => i,
        None => {
            v.push(s);
            v.len() - 1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_macro_examples() {
        assert_eq!(f1_macro(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap(), 1.0);
        let v = f1_macro(&[0, 0, 1, 1], &[1, 1, 1, 1]).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_macro(&[0, 1], &[1, 0]).unwrap(), 0.0);
        assert!(f1_macro(&[], &[]).is_err());
        assert!(f1_macro(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap(), Some(0.75));
        assert_eq!(roc_auc(&[0, 1, 0, 1], &[0.3; 4]).unwrap(), Some(0.5));
        assert_eq!(roc_auc(&[0, 0, 1], &[0.1, 0.2, 0.9]).unwrap(), Some(1.0));
        assert_eq!(roc_auc(&[1, 1], &[0.1, 0.2]).unwrap(), None);
    }

    #[test]
    fn far_examples() {
        let v = far_normal(&[0, 0, 0, 1], &[1, 0, 0, 1]).unwrap().unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(far_normal(&[0, 0, 1], &[0, 0, 1]).unwrap(), Some(0.0));
        assert_eq!(far_normal(&[0, 0, 1], &[1, 1, 1]).unwrap(), Some(1.0));
        assert_eq!(far_normal(&[1, 1], &[1, 0]).unwrap(), None);
    }

    #[test]
    fn mcc_and_balanced_accuracy() {
        let y = [0, 1, 0, 1, 1, 0];
        let inv: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        assert_eq!(mcc(&y, &y).unwrap(), 1.0);
        assert_eq!(mcc(&y, &inv).unwrap(), -1.0);
        assert_eq!(mcc(&y, &[1; 6]).unwrap(), 0.0);
        assert_eq!(balanced_accuracy(&y, &y).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&y, &[1; 6]).unwrap(), 0.5);
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[Some(0.4), Some(0.6)]).unwrap();
        assert!((s.mean.unwrap() - 0.5).abs() < 1e-15);
        assert!((s.std.unwrap() - 0.141_421_356_237_309_5).abs() < 1e-12);
        let s = summarize(&[Some(0.7)]).unwrap();
        assert_eq!((s.mean, s.std), (Some(0.7), None));
        let s = summarize(&[Some(0.3), Some(0.3), None]).unwrap();
        assert_eq!((s.std, s.n_missing), (Some(0.0), 1));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn csv_row_roundtrip() {
        let r = MetricsRecord {
            seed: 3,
            mode: "strict".into(),
            model: "gbdt".into(),
            f1_macro: 0.5,
            roc_auc: None,
            far_normal: Some(0.25),
            balanced_accuracy: 0.5,
            mcc: -0.125,
            n_train: 10,
            n_val: 2,
            n_test: 3,
            prior_train: 0.4,
            prior_test: 0.0,
        };
        let line = r.to_csv_row();
        assert_eq!(line, "3,strict,gbdt,0.500000,,0.250000,0.500000,-0.125000,10,2,3,0.400000,0.000000");
        assert_eq!(MetricsRecord::from_csv_row(&line).unwrap(), r);
    }
}
