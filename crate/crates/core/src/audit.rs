//! Feature modes and integrity audits of the working table.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{f1_macro, fmt_num};
use crate::models::{fit_predict_xy, ClassicalKind, ModelConfigs};
use crate::preprocess::MI_ESTIMATOR;
use crate::protocol::{make_blocks, plan_seed, prepare, PipelineConfig, SplitRows};
use crate::table::TelemetryTable;

const BUILTIN_MODES: &str = include_str!("../data/feature_modes.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Full,
    Loose,
    Strict,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::Full, FeatureMode::Loose, FeatureMode::Strict];

    pub fn name(&self) -> &'static str {
        match self {
            FeatureMode::Full => "full",
            FeatureMode::Loose => "loose",
            FeatureMode::Strict => "strict",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(FeatureMode::Full),
            "loose" => Ok(FeatureMode::Loose),
            "strict" => Ok(FeatureMode::Strict),
            other => Err(Error::InvalidArgument(format!("unknown feature mode `{other}`"))),
        }
    }
}

/// Name lists behind the loose and strict modes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLists {
    pub version: String,
    pub loose_drop: Vec<String>,
    pub strict_keep: Vec<String>,
}

impl Default for ModeLists {
    fn default() -> Self {
        Self::builtin()
    }
}

impl ModeLists {
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_MODES).expect("bundled feature_modes.toml parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Column indices kept by `mode`, in table order.
    pub fn columns(&self, mode: FeatureMode, names: &[String]) -> Result<Vec<usize>> {
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let resolve = |list: &[String]| -> Result<Vec<usize>> {
            list.iter()
                .map(|n| index.get(n.as_str()).copied().ok_or_else(|| Error::UnknownFeature(n.clone())))
                .collect()
        };
        let mut keep = match mode {
            FeatureMode::Full => (0..names.len()).collect(),
            FeatureMode::Loose => {
                let drop = resolve(&self.loose_drop)?;
                (0..names.len()).filter(|i| !drop.contains(i)).collect()
            }
            FeatureMode::Strict => {
                // strict must also survive the loose drop
                resolve(&self.loose_drop)?;
                let mut k = resolve(&self.strict_keep)?;
                if let Some(n) = self.strict_keep.iter().find(|n| self.loose_drop.contains(n)) {
                    return Err(Error::Config(format!("`{n}` is both dropped in loose and kept in strict")));
                }
                k.sort_unstable();
                k.dedup();
                k
            }
        };
        keep.sort_unstable();
        Ok(keep)
    }
}

/// Column subset for `mode`; the row count is unchanged.
pub fn apply_mode(table: &TelemetryTable, mode: FeatureMode, lists: &ModeLists) -> Result<TelemetryTable> {
    let cols = lists.columns(mode, &table.feature_names)?;
    Ok(table.select_columns(&cols))
}

/// Fraction of rows with bitwise-equal values.
pub fn same_ratio(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("same_ratio columns"));
    }
    let equal = a.iter().zip(b).filter(|(x, y)| x.to_bits() == y.to_bits()).count();
    Ok(equal as f64 / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DuplicatePair {
    pub a: String,
    pub b: String,
}

/// Every unordered pair of bitwise-identical columns. Columns are bucketed by
/// a hash of their bits and only compared within a bucket.
pub fn find_duplicate_pairs(table: &TelemetryTable) -> Vec<DuplicatePair> {
    use std::hash::{DefaultHasher, Hash, Hasher};
    let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
    for (j, col) in table.columns.iter().enumerate() {
        let mut h = DefaultHasher::new();
        for v in col {
            v.to_bits().hash(&mut h);
        }
        buckets.entry(h.finish()).or_default().push(j);
    }
    let mut pairs = Vec::new();
    for members in buckets.values() {
        for (p, &i) in members.iter().enumerate() {
            for &j in &members[p + 1..] {
                let (ci, cj) = (&table.columns[i], &table.columns[j]);
                if ci.iter().zip(cj).all(|(x, y)| x.to_bits() == y.to_bits()) {
                    let (lo, hi) = (i.min(j), i.max(j));
                    pairs.push((lo, hi));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
        .into_iter()
        .map(|(i, j)| DuplicatePair {
            a: table.feature_names[i].clone(),
            b: table.feature_names[j].clone(),
        })
        .collect()
}

/// Per-feature fraction of seeds whose top-`k` contains the feature, sorted by
/// descending rate then first appearance. `rankings` holds one ordered name
/// list per seed.
pub fn mi_stability(rankings: &[Vec<String>], k: usize) -> Result<Vec<(String, f64)>> {
    if rankings.is_empty() {
        return Err(Error::Empty("MI rankings"));
    }
    if rankings.len() < 2 {
        return Err(Error::InvalidArgument("MI stability needs at least two seeds".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for ranking in rankings {
        for name in ranking {
            if !counts.contains_key(name) {
                counts.insert(name.clone(), 0);
                order.push(name.clone());
            }
        }
        for name in ranking.iter().take(k) {
            *counts.get_mut(name).expect("inserted above") += 1;
        }
    }
    let n = rankings.len() as f64;
    let mut rates: Vec<(String, f64)> = order
        .into_iter()
        .map(|name| {
            let c = counts[&name];
            (name, c as f64 / n)
        })
        .collect();
    rates.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(rates)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuffleSensitivity {
    pub f1_shuffled: f64,
    pub f1_blocks: f64,
    /// `f1_shuffled - f1_blocks`; positive values indicate leakage inflation.
    pub delta: f64,
}

/// Test F1 of the same model and seed under a row-shuffled 70/15/15 split and
/// under the block split, both through the full-mode pipeline.
pub fn shuffle_sensitivity(
    table: &TelemetryTable,
    kind: ClassicalKind,
    seed: u64,
    config: &PipelineConfig,
) -> Result<ShuffleSensitivity> {
    let y = table.binary_labels();
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::SingleClass("shuffle-sensitivity table"));
    }
    let cols: Vec<usize> = (0..table.n_features()).collect();
    let models = ModelConfigs::default().with_seed(seed);
    let f1_on = |rows: SplitRows| -> Result<f64> {
        let prep = prepare(table, &cols, rows, seed, config, None)?;
        let scores = fit_predict_xy(kind, &models, &prep.x_fold, &prep.fold.y, &prep.x_test)?;
        let yhat: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
        f1_macro(&prep.y_test, &yhat)
    };

    let blocks = make_blocks(table, config.k)?;
    let plan = plan_seed(&blocks, &y, seed)?;
    let f1_blocks = f1_on(SplitRows::from_plan(&plan, &blocks))?;

    let n = table.n_rows();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x005f_f1e0));
    let n_train = (0.70 * n as f64).round() as usize;
    let n_val = (0.15 * n as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::Protocol(format!("table of {n} rows is too small for a 70/15/15 split")));
    }
    let shuffled = SplitRows::new(
        perm[..n_train].to_vec(),
        perm[n_train..n_train + n_val].to_vec(),
        perm[n_train + n_val..].to_vec(),
    );
    let f1_shuffled = f1_on(shuffled)?;
    Ok(ShuffleSensitivity {
        f1_shuffled,
        f1_blocks,
        delta: f1_shuffled - f1_blocks,
    })
}

/// Collected audit findings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub duplicate_pairs: Vec<DuplicatePair>,
    /// `(a, b, same_ratio)` for every audited pair.
    pub same_ratios: Vec<(String, String, f64)>,
    /// `(mode, feature, inclusion rate)`.
    pub mi_inclusion: Vec<(String, String, f64)>,
    /// `(seed, sensitivity)`.
    pub shuffle: Vec<(u64, ShuffleSensitivity)>,
}

impl AuditReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if !self.duplicate_pairs.is_empty() || !self.same_ratios.is_empty() {
            let _ = writeln!(s, "exact duplicate pairs: {}", self.duplicate_pairs.len());
            for p in &self.duplicate_pairs {
                let _ = writeln!(s, "  {} == {}", p.a, p.b);
            }
            for (a, b, r) in &self.same_ratios {
                let _ = writeln!(s, "same-ratio {a} / {b}: {}", fmt_num(*r));
            }
        }
        if !self.mi_inclusion.is_empty() {
            let _ = writeln!(s, "MI top-k inclusion rates (estimator: {MI_ESTIMATOR}):");
            for (mode, feat, rate) in &self.mi_inclusion {
                let _ = writeln!(s, "  [{mode}] {feat}: {}", fmt_num(*rate));
            }
        }
        if !self.shuffle.is_empty() {
            let _ = writeln!(s, "shuffle sensitivity (F1 shuffled - F1 blocks):");
            for (seed, d) in &self.shuffle {
                let _ = writeln!(
                    s,
                    "  seed {seed}: shuffled {} blocks {} delta {}",
                    fmt_num(d.f1_shuffled),
                    fmt_num(d.f1_blocks),
                    fmt_num(d.delta)
                );
            }
        }
        s
    }

    /// Long format: `section,key_a,key_b,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("section,key_a,key_b,value\n");
        for p in &self.duplicate_pairs {
            let _ = writeln!(s, "duplicate,{},{},1", p.a, p.b);
        }
        for (a, b, r) in &self.same_ratios {
            let _ = writeln!(s, "same_ratio,{a},{b},{}", fmt_num(*r));
        }
        if !self.mi_inclusion.is_empty() {
            let _ = writeln!(s, "mi_estimator,\"{MI_ESTIMATOR}\",,");
        }
        for (mode, feat, rate) in &self.mi_inclusion {
            let _ = writeln!(s, "mi_inclusion,{mode},{feat},{}", fmt_num(*rate));
        }
        for (seed, d) in &self.shuffle {
            let _ = writeln!(s, "shuffle_f1_shuffled,{seed},,{}", fmt_num(d.f1_shuffled));
            let _ = writeln!(s, "shuffle_f1_blocks,{seed},,{}", fmt_num(d.f1_blocks));
            let _ = writeln!(s, "shuffle_delta,{seed},,{}", fmt_num(d.delta));
        }
        s
    }
}

/// Duplicate pairs plus the same-ratio of each duplicate and of each extra pair.
pub fn fusion_audit(table: &TelemetryTable, extra_pairs: &[(String, String)]) -> Result<AuditReport> {
    let duplicate_pairs = find_duplicate_pairs(table);
    let mut same_ratios = Vec::new();
    for p in &duplicate_pairs {
        same_ratios.push((p.a.clone(), p.b.clone(), same_ratio(table.column(&p.a)?, table.column(&p.b)?)?));
    }
    for (a, b) in extra_pairs {
        let r = same_ratio(table.column(a)?, table.column(b)?)?;
        same_ratios.push((a.clone(), b.clone(), r));
    }
    Ok(AuditReport {
        duplicate_pairs,
        same_ratios,
        ..AuditReport::default()
    })
}

/// MI top-k inclusion rates per mode over `seeds`; degenerate seeds are skipped.
pub fn proxy_audit(
    table: &TelemetryTable,
    modes: &[FeatureMode],
    seeds: &[u64],
    config: &PipelineConfig,
    lists: &ModeLists,
) -> Result<AuditReport> {
    let y = table.binary_labels();
    let blocks = make_blocks(table, config.k)?;
    let mut mi_inclusion = Vec::new();
    for &mode in modes {
        let cols = lists.columns(mode, &table.feature_names)?;
        let mut rankings = Vec::new();
        for &seed in seeds {
            let plan = match plan_seed(&blocks, &y, seed) {
                Ok(p) => p,
                Err(Error::DegenerateSeed { .. }) => continue,
                Err(e) => return Err(e),
            };
            let prep = match prepare(table, &cols, SplitRows::from_plan(&plan, &blocks), seed, config, None) {
                Ok(p) => p,
                Err(Error::DegenerateSeed { .. }) => continue,
                Err(e) => return Err(e),
            };
            rankings.push(prep.ranking.order.iter().map(|&j| prep.feature_names[j].clone()).collect());
        }
        for (feat, rate) in mi_stability(&rankings, config.top_k)? {
            if rate > 0.0 {
                mi_inclusion.push((mode.name().to_string(), feat, rate));
            }
        }
    }
    Ok(AuditReport {
        mi_inclusion,
        ..AuditReport::default()
    })
}
