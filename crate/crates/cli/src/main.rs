//! `uavq`: ingestion, audits, batch runs, aggregation and reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uavq_core::audit::{fusion_audit, proxy_audit, shuffle_sensitivity, AuditReport};
use uavq_core::config::RunConfig;
use uavq_core::ingest::{ingest_dir, verify_checksums};
use uavq_core::models::ClassicalKind;
use uavq_core::protocol::ModelId;
use uavq_core::report::{parse_aggregate, write_report};
use uavq_core::runner::{aggregate_dir, prepare_out_dir, run_experiment, write_run};
use uavq_core::{Error, TelemetryTable};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

#[derive(Parser)]
#[command(name = "uavq", version, about = "Leakage-free benchmark for UAV telemetry anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align per-sensor files into one canonical table.
    Ingest {
        /// Directory of per-sensor delimited files.
        raw_dir: PathBuf,
        /// Output table path.
        #[arg(long)]
        out: PathBuf,
        /// Alignment base stream (default: the stream with most rows).
        #[arg(long)]
        base: Option<String>,
        /// SHA-256 manifest to verify before parsing.
        #[arg(long)]
        checksums: Option<PathBuf>,
    },
    /// Integrity and proxy audits.
    Audit {
        #[arg(value_enum)]
        kind: AuditKind,
        #[command(flatten)]
        common: Common,
        /// Extra column pair for the same-ratio audit, as `A,B`.
        #[arg(long = "pair")]
        pairs: Vec<String>,
        /// Model for the shuffle audit.
        #[arg(long, default_value = "gbdt")]
        model: String,
    },
    /// Full protocol over every seed and mode.
    Run {
        #[command(flatten)]
        common: Common,
        /// Worker threads (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Replace the output of a previous run.
        #[arg(long)]
        overwrite: bool,
        /// Comma-separated model names.
        #[arg(long)]
        models: Option<String>,
    },
    /// Mean and std per (model, mode, metric) of a run directory.
    Aggregate {
        results_dir: PathBuf,
    },
    /// One SVG bar chart per metric from an aggregate file.
    Report {
        aggregate: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditKind {
    Fusion,
    Proxy,
    Shuffle,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Canonical table; overrides the configured dataset.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds as a list or inclusive ranges, e.g. `0-9` or `0,3,5-7`.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated feature modes.
    #[arg(long)]
    modes: Option<String>,
    /// Number of contiguous blocks.
    #[arg(long)]
    k: Option<usize>,
    /// Multiclass labels to keep, e.g. `0,3` for the Fault-3 task.
    #[arg(long)]
    labels: Option<String>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Failure> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || usage(format!("bad seed list `{text}`"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(usage("empty seed list"));
    }
    Ok(seeds)
}

fn parse_list<T: std::str::FromStr<Err = Error>>(text: &str) -> Result<Vec<T>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(Failure::from))
        .collect()
}

fn parse_labels(text: &str) -> Result<Vec<u8>, Failure> {
    text.split(',')
        .map(|p| p.trim().parse::<u8>().map_err(|_| usage(format!("bad label list `{text}`"))))
        .collect()
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(t) = &self.table {
            c.dataset = Some(t.clone());
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if let Some(s) = &self.seeds {
            c.seeds = parse_seeds(s)?;
        }
        if let Some(m) = &self.modes {
            c.modes = parse_list(m)?;
        }
        if let Some(k) = self.k {
            c.pipeline.k = k;
        }
        if let Some(l) = &self.labels {
            c.labels = Some(parse_labels(l)?);
        }
        c.validate()?;
        Ok(c)
    }
}

fn write_audit(report: &AuditReport, out: Option<&Path>, stem: &str) -> Result<(), Failure> {
    print!("{}", report.to_text());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Failure {
            code: EXIT_DATA,
            message: format!("{}: {e}", dir.display()),
        })?;
        for (ext, text) in [("txt", report.to_text()), ("csv", report.to_csv())] {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, text).map_err(|e| Failure {
                code: EXIT_DATA,
                message: format!("{}: {e}", path.display()),
            })?;
        }
    }
    Ok(())
}

fn classical_kind(name: &str) -> Result<ClassicalKind, Failure> {
    ClassicalKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| usage(format!("shuffle audit needs a classical model, got `{name}`")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest {
            raw_dir,
            out,
            base,
            checksums,
        } => {
            if let Some(m) = checksums {
                verify_checksums(&raw_dir, &m)?;
            }
            let table = ingest_dir(&raw_dir, base.as_deref())?;
            table.write_csv(&out)?;
            println!(
                "wrote {} rows x {} features to {}",
                table.n_rows(),
                table.n_features(),
                out.display()
            );
        }
        Command::Audit {
            kind,
            common,
            pairs,
            model,
        } => {
            let cfg = common.resolve()?;
            let table: TelemetryTable = cfg.load_table()?;
            let out = common.out.as_deref();
            match kind {
                AuditKind::Fusion => {
                    let pairs = pairs
                        .iter()
                        .map(|p| {
                            p.split_once(',')
                                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                                .ok_or_else(|| usage(format!("bad pair `{p}`, expected A,B")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    write_audit(&fusion_audit(&table, &pairs)?, out, "fusion_audit")?;
                }
                AuditKind::Proxy => {
                    let lists = cfg.mode_lists()?;
                    let report = proxy_audit(&table, &cfg.modes, &cfg.seeds, &cfg.pipeline, &lists)?;
                    write_audit(&report, out, "proxy_audit")?;
                }
                AuditKind::Shuffle => {
                    let kind = classical_kind(&model)?;
                    let mut report = AuditReport::default();
                    for &seed in &cfg.seeds {
                        report
                            .shuffle
                            .push((seed, shuffle_sensitivity(&table, kind, seed, &cfg.pipeline)?));
                    }
                    write_audit(&report, out, "shuffle_audit")?;
                }
            }
        }
        Command::Run {
            common,
            jobs,
            overwrite,
            models,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(j) = jobs {
                cfg.jobs = Some(j);
            }
            if let Some(m) = models {
                cfg.model_set = parse_list::<ModelId>(&m)?;
            }
            cfg.validate()?;
            prepare_out_dir(&cfg.out, overwrite)?;
            let table = cfg.load_table()?;
            let lists = cfg.mode_lists()?;
            let summary = run_experiment(&table, &cfg, &lists)?;
            write_run(&cfg.out, &summary, &cfg)?;
            println!(
                "{} records from {} jobs ({} degenerate) written to {}",
                summary.records.len(),
                summary.n_jobs,
                summary.n_degenerate,
                cfg.out.display()
            );
            if summary.all_degenerate() {
                return Err(Failure {
                    code: EXIT_DEGENERATE,
                    message: "every seed was degenerate; no metrics produced".into(),
                });
            }
        }
        Command::Aggregate { results_dir } => {
            print!("{}", aggregate_dir(&results_dir)?);
        }
        Command::Report { aggregate, out } => {
            let text = std::fs::read_to_string(&aggregate).map_err(|e| Failure {
                code: EXIT_DATA,
                message: format!("{}: {e}", aggregate.display()),
            })?;
            let rows = parse_aggregate(&text)?;
            let written = write_report(&rows, &out)?;
            print!("{text}");
            eprintln!("wrote {} charts to {}", written.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if informational {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_USAGE)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("uavq: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
