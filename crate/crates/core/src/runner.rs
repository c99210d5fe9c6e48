//! Parallel execution of every (seed, mode) job and the result files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::audit::{FeatureMode, ModeLists};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, MetricsRecord, AGGREGATE_HEADER, RESULTS_HEADER};
use crate::protocol::{make_blocks, run_seed, ModelId};
use crate::table::TelemetryTable;

pub const RESULTS_FILE: &str = "results.csv";
pub const LOG_FILE: &str = "run.log";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq)]
pub enum JobStatus {
    Ok,
    Degenerate(String),
}

/// One run-log line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLine {
    pub seed: u64,
    pub mode: FeatureMode,
    pub model: ModelId,
    pub status: JobStatus,
    pub elapsed: Duration,
}

impl LogLine {
    pub fn render(&self) -> String {
        let status = match &self.status {
            JobStatus::Ok => "ok".to_string(),
            JobStatus::Degenerate(reason) => format!("degenerate ({reason})"),
        };
        format!(
            "seed={} mode={} model={} status={} wall_ms={}",
            self.seed,
            self.mode,
            self.model,
            status,
            self.elapsed.as_millis()
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    /// Sorted by seed, mode, then model order.
    pub records: Vec<MetricsRecord>,
    pub log: Vec<LogLine>,
    pub n_jobs: usize,
    pub n_degenerate: usize,
}

impl RunSummary {
    pub fn all_degenerate(&self) -> bool {
        self.n_jobs > 0 && self.n_degenerate == self.n_jobs
    }

    pub fn results_csv(&self) -> String {
        render_results(&self.records)
    }

    pub fn log_text(&self) -> String {
        self.log.iter().fold(String::new(), |mut s, l| {
            let _ = writeln!(s, "{}", l.render());
            s
        })
    }
}

pub fn render_results(records: &[MetricsRecord]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for r in records {
        let _ = writeln!(s, "{}", r.to_csv_row());
    }
    s
}

fn mode_rank(mode: &str) -> usize {
    FeatureMode::ALL.iter().position(|m| m.name() == mode).unwrap_or(usize::MAX)
}

fn model_rank(model: &str) -> usize {
    model.parse::<ModelId>().map_or(usize::MAX, |m| m.rank())
}

/// Runs every (seed, mode) job over a pool of `jobs` threads. Degenerate seeds
/// are logged and skipped; any other failure aborts the run.
pub fn run_experiment(table: &TelemetryTable, config: &RunConfig, lists: &ModeLists) -> Result<RunSummary> {
    config.validate()?;
    for &mode in &config.modes {
        lists.columns(mode, &table.feature_names)?;
    }
    let blocks = make_blocks(table, config.pipeline.k)?;
    let jobs: Vec<(u64, FeatureMode)> = config
        .seeds
        .iter()
        .flat_map(|&s| config.modes.iter().map(move |&m| (s, m)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&(seed, mode)| {
                let start = Instant::now();
                let r = run_seed(table, &blocks, seed, mode, &config.model_set, &config.pipeline, lists);
                (seed, mode, r, start.elapsed())
            })
            .collect()
    });

    let mut summary = RunSummary {
        n_jobs: jobs.len(),
        ..RunSummary::default()
    };
    for (seed, mode, outcome, _) in outcomes {
        match outcome {
            Ok(run) => {
                summary.records.extend(run.records);
                summary.log.extend(run.timings.into_iter().map(|t| LogLine {
                    seed,
                    mode,
                    model: t.model,
                    status: JobStatus::Ok,
                    elapsed: t.elapsed,
                }));
            }
            Err(Error::DegenerateSeed { reason, .. }) => {
                summary.n_degenerate += 1;
                summary.log.extend(config.model_set.iter().map(|&model| LogLine {
                    seed,
                    mode,
                    model,
                    status: JobStatus::Degenerate(reason.clone()),
                    elapsed: Duration::ZERO,
                }));
            }
            Err(e) => return Err(e),
        }
    }
    summary.records.sort_by(|a, b| {
        (a.seed, mode_rank(&a.mode), model_rank(&a.model)).cmp(&(b.seed, mode_rank(&b.mode), model_rank(&b.model)))
    });
    summary
        .log
        .sort_by_key(|l| (l.seed, l.mode, l.model.rank()));
    Ok(summary)
}

/// Refuses a directory that already holds run output unless `overwrite`.
pub fn prepare_out_dir(out: &Path, overwrite: bool) -> Result<()> {
    let existing: Vec<PathBuf> = [RESULTS_FILE, LOG_FILE, AGGREGATE_FILE]
        .iter()
        .map(|f| out.join(f))
        .filter(|p| p.exists())
        .collect();
    if !existing.is_empty() && !overwrite {
        return Err(Error::Config(format!(
            "{} already holds a previous run; pass --overwrite to replace it",
            out.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Writes results, run log and the resolved config.
pub fn write_run(out: &Path, summary: &RunSummary, config: &RunConfig) -> Result<()> {
    write(out.join(RESULTS_FILE), &summary.results_csv())?;
    write(out.join(LOG_FILE), &summary.log_text())?;
    write(out.join(CONFIG_FILE), &config.to_toml_string()?)
}

pub fn read_results(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == RESULTS_HEADER => {}
        _ => return Err(Error::Schema(format!("{}: unexpected results header", path.display()))),
    }
    lines.filter(|l| !l.trim().is_empty()).map(MetricsRecord::from_csv_row).collect()
}

/// Aggregates `dir/results.csv` into `dir/aggregate.csv` and returns its text.
pub fn aggregate_dir(dir: &Path) -> Result<String> {
    let path = dir.join(RESULTS_FILE);
    if !path.exists() {
        return Err(Error::Empty("results directory has no results.csv"));
    }
    let records = read_results(&path)?;
    let mut s = format!("{AGGREGATE_HEADER}\n");
    for row in aggregate(&records)? {
        let _ = writeln!(s, "{}", row.to_csv_row());
    }
    write(dir.join(AGGREGATE_FILE), &s)?;
    Ok(s)
}
