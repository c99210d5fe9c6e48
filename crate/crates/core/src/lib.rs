//! Leakage-free benchmark engine for UAV telemetry anomaly detection.
//!
//! The crate covers the whole experiment: telemetry ingestion and a synthetic
//! generator ([`ingest`]), feature-mode and integrity audits ([`audit`]), the
//! group-aware block protocol ([`protocol`]), train-only preprocessing
//! ([`preprocess`]), classical heads ([`models`]), a statevector simulator
//! ([`qsim`]) backing the data re-uploading classifier ([`dru`]), the paired
//! hybrid family ([`hybrid`]), metrics ([`metrics`]) and the batch runner
//! ([`config`], [`runner`], [`report`]).

pub mod audit;
pub mod config;
pub mod dru;
pub mod error;
pub mod hybrid;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod preprocess;
pub mod protocol;
pub mod qsim;
pub mod report;
pub mod runner;
pub mod table;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use table::TelemetryTable;
