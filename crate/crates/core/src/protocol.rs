//! Group-aware temporal protocol: contiguous blocks, whole-block splits and the
//! isolated per-(seed, mode) pipeline.
//!
//! Every fitted statistic (robust scaler, resampling, MI ranking, angle
//! scaler, models) sees training rows only. Validation and test rows are
//! transformed with the training fits and never resampled.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{FeatureMode, ModeLists};
use crate::dru::{DruSpec, FitReport, TrainBudget};
use crate::error::{Error, Result};
use crate::hybrid::{self, fit_transform_family, hybrid_fit_predict, split_ab, HybridKind};
use crate::matrix::Matrix;
use crate::metrics::{MetricsRecord, SplitStats};
use crate::models::{fit_predict_xy, ClassicalKind, GbdtConfig, ModelConfigs};
use crate::preprocess::{
    mi_rank, select_top_k, smote_tomek, AngleScalerFit, BalancedFold, MiRanking, RobustScalerFit,
};
use crate::table::TelemetryTable;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockIndex {
    pub id: usize,
    pub rows: Range<usize>,
}

/// `k` contiguous blocks over `n` rows; the first `n mod k` blocks hold one
/// extra row.
pub fn block_ranges(n: usize, k: usize) -> Result<Vec<BlockIndex>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 blocks, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("{k} blocks over {n} rows")));
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    Ok((0..k)
        .map(|id| {
            let len = base + usize::from(id < extra);
            let b = BlockIndex {
                id,
                rows: start..start + len,
            };
            start += len;
            b
        })
        .collect())
}

/// Blocks over a time-sorted table.
pub fn make_blocks(table: &TelemetryTable, k: usize) -> Result<Vec<BlockIndex>> {
    if !table.is_sorted() {
        return Err(Error::Protocol("table must be sorted by TimeUS before blocking".into()));
    }
    block_ranges(table.n_rows(), k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitRole {
    Train,
    Validation,
    Test,
}

/// Block counts `(train, validation, test)` for `k` blocks.
pub fn split_sizes(k: usize) -> Result<(usize, usize, usize)> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("a three-way split needs at least 3 blocks, got {k}")));
    }
    let train = ((0.70 * k as f64).round() as usize).clamp(1, k - 2);
    let m = k - train;
    let val = (m / 2).max(1);
    Ok((train, val, m - val))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub seed: u64,
    /// Role of each block, indexed by block id.
    pub assignment: Vec<SplitRole>,
}

impl SplitPlan {
    pub fn blocks(&self, role: SplitRole) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&b| self.assignment[b] == role).collect()
    }

    /// Row indices of `role`, in time order.
    pub fn rows(&self, blocks: &[BlockIndex], role: SplitRole) -> Vec<usize> {
        blocks
            .iter()
            .filter(|b| self.assignment[b.id] == role)
            .flat_map(|b| b.rows.clone())
            .collect()
    }

    /// Every split non-empty.
    pub fn validate(&self) -> Result<()> {
        for role in [SplitRole::Train, SplitRole::Validation, SplitRole::Test] {
            if self.blocks(role).is_empty() {
                return Err(Error::Protocol(format!("seed {}: {role:?} split has no blocks", self.seed)));
            }
        }
        Ok(())
    }
}

/// Two-stage whole-block assignment: a seeded shuffle picks the training
/// blocks, a second shuffle of the remainder picks validation.
pub fn split_blocks(blocks: &[BlockIndex], seed: u64) -> Result<SplitPlan> {
    let k = blocks.len();
    let (n_train, n_val, _) = split_sizes(k)?;
    if blocks.iter().enumerate().any(|(i, b)| b.id != i) {
        return Err(Error::Protocol("block ids must be 0..K in order".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..k).collect();
    ids.shuffle(&mut rng);
    let mut rest = ids.split_off(n_train);
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    let mut assignment = vec![SplitRole::Test; k];
    for &b in &ids {
        assignment[b] = SplitRole::Train;
    }
    for &b in &rest[..n_val] {
        assignment[b] = SplitRole::Validation;
    }
    let plan = SplitPlan { seed, assignment };
    plan.validate()?;
    Ok(plan)
}

/// Split plan whose training blocks contain both binary classes.
pub fn plan_seed(blocks: &[BlockIndex], y: &[u8], seed: u64) -> Result<SplitPlan> {
    let plan = split_blocks(blocks, seed)?;
    let train = plan.rows(blocks, SplitRole::Train);
    check_classes(&train, y, seed)?;
    Ok(plan)
}

fn check_classes(train: &[usize], y: &[u8], seed: u64) -> Result<()> {
    let pos = train.iter().filter(|&&i| y[i] == 1).count();
    if pos == 0 || pos == train.len() {
        return Err(Error::DegenerateSeed {
            seed,
            reason: format!("training split holds only class {}", u8::from(pos > 0)),
        });
    }
    Ok(())
}

/// Row indices of each split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRows {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitRows {
    pub fn new(train: Vec<usize>, val: Vec<usize>, test: Vec<usize>) -> Self {
        Self { train, val, test }
    }

    pub fn from_plan(plan: &SplitPlan, blocks: &[BlockIndex]) -> Self {
        Self {
            train: plan.rows(blocks, SplitRole::Train),
            val: plan.rows(blocks, SplitRole::Validation),
            test: plan.rows(blocks, SplitRole::Test),
        }
    }
}

/// One of the twelve reported models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelId {
    Classical(ClassicalKind),
    Dru,
    Hybrid(HybridKind),
    /// Boosted trees on every strict-list feature, independent of the mode.
    PhysOracle,
}

impl ModelId {
    pub const ALL: [ModelId; 12] = [
        ModelId::Classical(ClassicalKind::LogReg),
        ModelId::Classical(ClassicalKind::Mlp),
        ModelId::Classical(ClassicalKind::RandomForest),
        ModelId::Classical(ClassicalKind::Gbdt),
        ModelId::Dru,
        ModelId::Hybrid(HybridKind::Raw),
        ModelId::Hybrid(HybridKind::Pca),
        ModelId::Hybrid(HybridKind::Poly2),
        ModelId::Hybrid(HybridKind::RandomRbf),
        ModelId::Hybrid(HybridKind::DruUntrained),
        ModelId::Hybrid(HybridKind::DruTrained),
        ModelId::PhysOracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelId::Classical(k) => k.name(),
            ModelId::Dru => "dru",
            ModelId::Hybrid(k) => k.model_name(),
            ModelId::PhysOracle => "phys_oracle",
        }
    }

    /// Position in [`ModelId::ALL`], used for output ordering.
    pub fn rank(&self) -> usize {
        Self::ALL.iter().position(|m| m == self).expect("ALL lists every model")
    }

    fn needs_family(&self) -> bool {
        matches!(self, ModelId::Dru | ModelId::Hybrid(_))
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

impl TryFrom<String> for ModelId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelId> for String {
    fn from(m: ModelId) -> String {
        m.name().to_string()
    }
}

/// Per-seed pipeline settings shared by every mode and model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Number of contiguous blocks.
    pub k: usize,
    pub smote_k: usize,
    pub top_k: usize,
    pub dru: DruSpec,
    pub dru_budget: TrainBudget,
    pub models: ModelConfigs,
    /// Pick the DRU threshold on the validation split instead of using 0.5.
    pub tune_dru_threshold: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 10,
            smote_k: 5,
            top_k: 5,
            dru: DruSpec::default(),
            dru_budget: TrainBudget::default(),
            models: ModelConfigs::default(),
            tune_dru_threshold: false,
        }
    }
}

/// Fitted state of one pipeline run up to the model inputs.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub seed: u64,
    pub rows: SplitRows,
    /// Names of the mode's columns.
    pub feature_names: Vec<String>,
    pub scaler: RobustScalerFit,
    /// Robust-scaled, resampled training fold over all mode columns.
    pub fold: BalancedFold,
    pub ranking: MiRanking,
    /// Indices into `feature_names`, best first.
    pub selected: Vec<usize>,
    pub angle: AngleScalerFit,
    pub x_fold: Matrix,
    pub x_val: Matrix,
    pub y_val: Vec<u8>,
    pub x_test: Matrix,
    pub y_test: Vec<u8>,
    pub stats: SplitStats,
}

impl PreparedSplit {
    pub fn selected_names(&self) -> Vec<&str> {
        self.selected.iter().map(|&j| self.feature_names[j].as_str()).collect()
    }
}

fn prior(rows: &[usize], y: &[u8]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|&&i| y[i] == 1).count() as f64 / rows.len() as f64
}

fn design(table: &TelemetryTable, cols: &[usize], rows: &[usize]) -> Matrix {
    let columns: Vec<Vec<f64>> = cols
        .iter()
        .map(|&c| rows.iter().map(|&r| table.columns[c][r]).collect())
        .collect();
    if rows.is_empty() {
        return Matrix::zeros(0, cols.len());
    }
    Matrix::from_columns(&columns).expect("columns share the row count")
}

/// Subset, robust scale, resample, MI rank, top-k and angle scale.
/// `top_k` overrides `config.top_k`.
pub fn prepare(
    table: &TelemetryTable,
    cols: &[usize],
    rows: SplitRows,
    seed: u64,
    config: &PipelineConfig,
    top_k: Option<usize>,
) -> Result<PreparedSplit> {
    let y = table.binary_labels();
    check_classes(&rows.train, &y, seed)?;
    if rows.test.is_empty() {
        return Err(Error::Protocol(format!("seed {seed}: empty test split")));
    }
    let k = top_k.unwrap_or(config.top_k);
    if cols.len() < k {
        return Err(Error::InvalidArgument(format!(
            "mode keeps {} features, fewer than top-{k}",
            cols.len()
        )));
    }
    let feature_names = cols.iter().map(|&c| table.feature_names[c].clone()).collect();
    let x_train = design(table, cols, &rows.train);
    let y_train: Vec<u8> = rows.train.iter().map(|&i| y[i]).collect();
    let scaler = RobustScalerFit::fit(&x_train)?;
    let xs_train = scaler.transform(&x_train)?;
    let xs_val = scaler.transform(&design(table, cols, &rows.val))?;
    let xs_test = scaler.transform(&design(table, cols, &rows.test))?;

    let fold = smote_tomek(&xs_train, &y_train, config.smote_k, seed)?;
    let ranking = mi_rank(&fold.x, &fold.y)?;
    let selected = select_top_k(&ranking, k)?;
    let angle = AngleScalerFit::fit(&fold.x.select_cols(&selected))?;
    let x_fold = angle.transform(&fold.x.select_cols(&selected))?;
    let x_val = angle.transform(&xs_val.select_cols(&selected))?;
    let x_test = angle.transform(&xs_test.select_cols(&selected))?;

    let stats = SplitStats {
        n_train: rows.train.len(),
        n_val: rows.val.len(),
        n_test: rows.test.len(),
        prior_train: prior(&rows.train, &y),
        prior_test: prior(&rows.test, &y),
    };
    Ok(PreparedSplit {
        seed,
        y_val: rows.val.iter().map(|&i| y[i]).collect(),
        y_test: rows.test.iter().map(|&i| y[i]).collect(),
        rows,
        feature_names,
        scaler,
        fold,
        ranking,
        selected,
        angle,
        x_fold,
        x_val,
        x_test,
        stats,
    })
}

/// What one hybrid variant consumed, for pairing checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantTrace {
    pub kind: HybridKind,
    /// SHA-256 of the `X` block of the head's training matrix.
    pub x_digest: [u8; 32],
    pub head: GbdtConfig,
    /// Column count of `[X | T(X)]`.
    pub width: usize,
    pub b_rows: Vec<usize>,
}

fn digest_columns(m: &Matrix, n_cols: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    for r in m.rows() {
        for v in &r[..n_cols] {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().into()
}

/// Outcome of the hybrid family for one prepared split.
pub struct HybridRun {
    pub family: hybrid::HybridFamily,
    pub split: hybrid::SubsetSplit,
    pub scores: Vec<(HybridKind, Vec<f64>)>,
    pub traces: Vec<VariantTrace>,
}

/// Fits the six transforms on subset A and the paired heads on subset B.
pub fn run_hybrids(prep: &PreparedSplit, config: &PipelineConfig, kinds: &[HybridKind]) -> Result<HybridRun> {
    let seed = prep.seed;
    let split = split_ab(&prep.fold.y, seed, config.dru_budget.max_per_class);
    let family = fit_transform_family(&prep.x_fold, &prep.fold.y, &split, seed, config.dru, &config.dru_budget)?;
    let x_b = prep.x_fold.select_rows(&split.b);
    let y_b: Vec<u8> = split.b.iter().map(|&i| prep.fold.y[i]).collect();
    let head = config.models.with_seed(seed).gbdt;
    let d = x_b.n_cols();
    let results: Vec<Result<(Vec<f64>, VariantTrace)>> = kinds
        .par_iter()
        .map(|&kind| {
            let t = family.get(kind);
            let train = t.augment(&x_b)?;
            let trace = VariantTrace {
                kind,
                x_digest: digest_columns(&train, d),
                head,
                width: train.n_cols(),
                b_rows: split.b.clone(),
            };
            Ok((hybrid_fit_predict(t, &head, &x_b, &y_b, &prep.x_test)?, trace))
        })
        .collect();
    let mut scores = Vec::with_capacity(kinds.len());
    let mut traces = Vec::with_capacity(kinds.len());
    for (&kind, r) in kinds.iter().zip(results) {
        let (s, t) = r?;
        scores.push((kind, s));
        traces.push(t);
    }
    Ok(HybridRun {
        family,
        split,
        scores,
        traces,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelTiming {
    pub model: ModelId,
    pub elapsed: Duration,
}

/// Records of one (seed, mode) run.
pub struct SeedRun {
    pub seed: u64,
    pub mode: FeatureMode,
    pub plan: SplitPlan,
    pub records: Vec<MetricsRecord>,
    pub timings: Vec<ModelTiming>,
    pub dru_report: Option<FitReport>,
    pub hybrid_traces: Vec<VariantTrace>,
}

/// Runs the isolated pipeline of one (seed, mode) pair and evaluates every
/// requested model on the test split.
pub fn run_seed(
    table: &TelemetryTable,
    blocks: &[BlockIndex],
    seed: u64,
    mode: FeatureMode,
    models: &[ModelId],
    config: &PipelineConfig,
    lists: &ModeLists,
) -> Result<SeedRun> {
    let y = table.binary_labels();
    let plan = plan_seed(blocks, &y, seed)?;
    let rows = SplitRows::from_plan(&plan, blocks);
    let cols = lists.columns(mode, &table.feature_names)?;
    let prep = prepare(table, &cols, rows.clone(), seed, config, None)?;
    let model_cfg = config.models.with_seed(seed);
    let mode_name = mode.name();
    let evaluate = |model: ModelId, scores: &[f64], threshold: f64| {
        MetricsRecord::evaluate(seed, mode_name, model.name(), &prep.y_test, scores, threshold, prep.stats)
    };

    let mut records = Vec::with_capacity(models.len());
    let mut timings = Vec::with_capacity(models.len());
    let mut dru_report = None;
    let mut hybrid_traces = Vec::new();

    if models.iter().any(ModelId::needs_family) {
        let start = Instant::now();
        let hyb_kinds: Vec<HybridKind> = models
            .iter()
            .filter_map(|m| match m {
                ModelId::Hybrid(k) => Some(*k),
                _ => None,
            })
            .collect();
        let run = run_hybrids(&prep, config, &hyb_kinds)?;
        let per_model = start.elapsed() / (hyb_kinds.len() + 1) as u32;
        if models.contains(&ModelId::Dru) {
            let mut dru = run.family.dru_trained().clone();
            if config.tune_dru_threshold && prep.y_val.contains(&0) && prep.y_val.contains(&1) {
                dru.tune_threshold(&prep.x_val, &prep.y_val)?;
            }
            let scores = dru.score_matrix(&prep.x_test)?;
            records.push(evaluate(ModelId::Dru, &scores, dru.threshold)?);
            timings.push(ModelTiming {
                model: ModelId::Dru,
                elapsed: per_model,
            });
        }
        for (kind, scores) in &run.scores {
            records.push(evaluate(ModelId::Hybrid(*kind), scores, 0.5)?);
            timings.push(ModelTiming {
                model: ModelId::Hybrid(*kind),
                elapsed: per_model,
            });
        }
        dru_report = Some(run.family.dru_report);
        hybrid_traces = run.traces;
    }

    let others: Vec<ModelId> = models.iter().copied().filter(|m| !m.needs_family()).collect();
    let outcomes: Vec<Result<(MetricsRecord, Duration)>> = others
        .par_iter()
        .map(|&model| {
            let start = Instant::now();
            let scores = match model {
                ModelId::Classical(kind) => fit_predict_xy(kind, &model_cfg, &prep.x_fold, &prep.fold.y, &prep.x_test)?,
                ModelId::PhysOracle => {
                    let strict = lists.columns(FeatureMode::Strict, &table.feature_names)?;
                    let p = prepare(table, &strict, rows.clone(), seed, config, Some(strict.len()))?;
                    fit_predict_xy(ClassicalKind::Gbdt, &model_cfg, &p.x_fold, &p.fold.y, &p.x_test)?
                }
                ModelId::Dru | ModelId::Hybrid(_) => unreachable!("handled with the family"),
            };
            Ok((evaluate(model, &scores, 0.5)?, start.elapsed()))
        })
        .collect();
    for (model, outcome) in others.into_iter().zip(outcomes) {
        let (record, elapsed) = outcome?;
        records.push(record);
        timings.push(ModelTiming { model, elapsed });
    }
    let order = |name: &str| models.iter().position(|m| m.name() == name).unwrap_or(usize::MAX);
    records.sort_by_key(|r| order(&r.model));
    timings.sort_by_key(|t| order(t.model.name()));
    Ok(SeedRun {
        seed,
        mode,
        plan,
        records,
        timings,
        dru_report,
        hybrid_traces,
    })
}
