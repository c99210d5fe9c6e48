//! Reconstruction of the working table from per-sensor text exports.

mod synth;

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::table::TelemetryTable;

pub use synth::{
    synth_generate, synth_schema, SynthSpec, ACCUMULATORS, CONTEXT_FEATURES, LOOSE_DROPS, PHYSICAL_FEATURES,
};

/// One sensor's samples. `TimeUS` is strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorStream {
    pub name: String,
    pub time_us: Vec<i64>,
    pub channels: Vec<String>,
    /// Column-major, one vector per channel.
    pub values: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
}

impl SensorStream {
    pub fn new(
        name: impl Into<String>,
        time_us: Vec<i64>,
        channels: Vec<String>,
        values: Vec<Vec<f64>>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let name = name.into();
        let n = time_us.len();
        if channels.len() != values.len() {
            return Err(Error::Dimension {
                expected: channels.len(),
                got: values.len(),
            });
        }
        if let Some(c) = values.iter().find(|c| c.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: c.len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: l.len(),
                });
            }
            if l.iter().any(|&v| v > 4) {
                return Err(Error::Schema(format!("stream `{name}` has a label outside 0..=4")));
            }
        }
        if let Some(row) = time_us.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::UnsortedStream { stream: name, row: row + 1 });
        }
        Ok(Self {
            name,
            time_us,
            channels,
            values,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.time_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_us.is_empty()
    }

    /// Delimited text with a header row, `TimeUS` first and an optional
    /// `label` column.
    pub fn from_reader<R: Read>(name: &str, reader: R, origin: &Path) -> Result<Self> {
        let parse_err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            msg,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| parse_err(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.first().map(String::as_str) != Some("TimeUS") {
            return Err(Error::Schema(format!("{}: first column must be TimeUS", origin.display())));
        }
        let label_col = header.iter().position(|h| h == "label");
        let channel_cols: Vec<usize> = (1..header.len()).filter(|&i| Some(i) != label_col).collect();
        let mut time_us = Vec::new();
        let mut values = vec![Vec::new(); channel_cols.len()];
        let mut labels = label_col.map(|_| Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| parse_err(e.to_string()))?;
            let field = |i: usize| rec.get(i).ok_or_else(|| parse_err(format!("row {}: missing column {i}", line + 1)));
            let t = field(0)?;
            time_us.push(t.parse::<i64>().map_err(|e| parse_err(format!("row {}: TimeUS `{t}`: {e}", line + 1)))?);
            for (slot, &c) in values.iter_mut().zip(&channel_cols) {
                let v = field(c)?;
                slot.push(v.parse::<f64>().map_err(|e| parse_err(format!("row {}: `{v}`: {e}", line + 1)))?);
            }
            if let (Some(l), Some(c)) = (labels.as_mut(), label_col) {
                let v = field(c)?;
                l.push(v.parse::<u8>().map_err(|e| parse_err(format!("row {}: label `{v}`: {e}", line + 1)))?);
            }
        }
        let channels = channel_cols.iter().map(|&c| header[c].clone()).collect();
        Self::new(name, time_us, channels, values, labels)
    }

    /// Sensor name is the file stem.
    pub fn read_file(path: &Path) -> Result<Self> {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Schema(format!("{}: no usable file stem", path.display())))?;
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(name, file, path)
    }
}

/// One aligned channel.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedColumn {
    pub sensor: String,
    pub channel: String,
    pub values: Vec<f64>,
}

/// Base rows with the backward as-of value of every other stream.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedRows {
    pub time_us: Vec<i64>,
    pub columns: Vec<JoinedColumn>,
    /// Labels present for each row, in stream order.
    pub labels: Vec<Vec<u8>>,
    /// `source_time[s][i]`: TimeUS of the sample stream `s` contributed to row
    /// `i` (stream 0 is the base).
    pub source_time: Vec<Vec<i64>>,
}

/// For each base row, every other stream's latest sample with
/// `TimeUS <= base TimeUS`. Base rows before any stream's first sample are
/// dropped.
pub fn asof_align(base: &SensorStream, others: &[SensorStream]) -> Result<JoinedRows> {
    for s in std::iter::once(base).chain(others) {
        if let Some(row) = s.time_us.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::UnsortedStream {
                stream: s.name.clone(),
                row: row + 1,
            });
        }
    }
    let mut cursors = vec![0usize; others.len()];
    let mut picks: Vec<(usize, Vec<usize>)> = Vec::with_capacity(base.len());
    for (i, &t) in base.time_us.iter().enumerate() {
        let mut src = Vec::with_capacity(others.len());
        let mut complete = true;
        for (s, stream) in others.iter().enumerate() {
            while cursors[s] < stream.len() && stream.time_us[cursors[s]] <= t {
                cursors[s] += 1;
            }
            if cursors[s] == 0 {
                complete = false;
            } else {
                src.push(cursors[s] - 1);
            }
        }
        if complete {
            picks.push((i, src));
        }
    }

    let mut columns = Vec::new();
    for (c, name) in base.channels.iter().enumerate() {
        columns.push(JoinedColumn {
            sensor: base.name.clone(),
            channel: name.clone(),
            values: picks.iter().map(|(i, _)| base.values[c][*i]).collect(),
        });
    }
    for (s, stream) in others.iter().enumerate() {
        for (c, name) in stream.channels.iter().enumerate() {
            columns.push(JoinedColumn {
                sensor: stream.name.clone(),
                channel: name.clone(),
                values: picks.iter().map(|(_, src)| stream.values[c][src[s]]).collect(),
            });
        }
    }
    let labels = picks
        .iter()
        .map(|(i, src)| {
            let mut l = Vec::new();
            if let Some(bl) = &base.labels {
                l.push(bl[*i]);
            }
            for (s, stream) in others.iter().enumerate() {
                if let Some(sl) = &stream.labels {
                    l.push(sl[src[s]]);
                }
            }
            l
        })
        .collect();
    let mut source_time = vec![picks.iter().map(|(i, _)| base.time_us[*i]).collect::<Vec<_>>()];
    for (s, stream) in others.iter().enumerate() {
        source_time.push(picks.iter().map(|(_, src)| stream.time_us[src[s]]).collect());
    }
    Ok(JoinedRows {
        time_us: picks.iter().map(|(i, _)| base.time_us[*i]).collect(),
        columns,
        labels,
        source_time,
    })
}

/// Strict-majority label; ties for the top count and empty input discard.
pub fn vote_labels(labels: &[u8]) -> Option<u8> {
    let mut counts = [0usize; 256];
    for &l in labels {
        counts[l as usize] += 1;
    }
    let max = *counts.iter().max()?;
    if max == 0 {
        return None;
    }
    let mut winners = counts.iter().enumerate().filter(|(_, &c)| c == max);
    let (label, _) = winners.next()?;
    if winners.next().is_some() {
        return None;
    }
    Some(label as u8)
}

/// Renames colliding channels to `SENSOR_channel`, votes labels (discarding
/// ties), drops zero-variance columns and sorts by time.
pub fn finalize(joined: JoinedRows) -> Result<TelemetryTable> {
    let mut uses: HashMap<&str, usize> = HashMap::new();
    for c in &joined.columns {
        *uses.entry(c.channel.as_str()).or_default() += 1;
    }
    let names: Vec<String> = joined
        .columns
        .iter()
        .map(|c| {
            if uses[c.channel.as_str()] > 1 {
                format!("{}_{}", c.sensor, c.channel)
            } else {
                c.channel.clone()
            }
        })
        .collect();
    let mut seen = HashMap::new();
    for n in &names {
        if seen.insert(n.as_str(), ()).is_some() {
            return Err(Error::Schema(format!("duplicate column `{n}` after renaming")));
        }
    }
    if names.iter().any(|n| n == "TimeUS" || n == "label") {
        return Err(Error::Schema("channel named TimeUS or label".into()));
    }

    let kept: Vec<(usize, u8)> = joined
        .labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| vote_labels(l).map(|v| (i, v)))
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty("finalized table"));
    }
    let time_us = kept.iter().map(|&(i, _)| joined.time_us[i]).collect();
    let labels = kept.iter().map(|&(_, l)| l).collect();
    let mut feature_names = Vec::new();
    let mut columns = Vec::new();
    for (c, name) in joined.columns.iter().zip(names) {
        let col: Vec<f64> = kept.iter().map(|&(i, _)| c.values[i]).collect();
        if has_variance(&col) {
            feature_names.push(name);
            columns.push(col);
        }
    }
    TelemetryTable::new(time_us, feature_names, columns, labels)
}

/// Exact test; a rounded mean can leave a constant column with variance.
fn has_variance(col: &[f64]) -> bool {
    col.iter().any(|&v| v != col[0])
}

/// Delimited files in `dir`, sorted by file name.
pub fn stream_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "txt")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Empty("no sensor files found"));
    }
    Ok(files)
}

pub fn load_streams(dir: &Path) -> Result<Vec<SensorStream>> {
    stream_files(dir)?.par_iter().map(|p| SensorStream::read_file(p)).collect()
}

/// Index of the alignment base: `name` if given, else the stream with the
/// most rows (ties to the first).
pub fn choose_base(streams: &[SensorStream], name: Option<&str>) -> Result<usize> {
    match name {
        Some(n) => streams
            .iter()
            .position(|s| s.name == n)
            .ok_or_else(|| Error::InvalidArgument(format!("no stream named `{n}`"))),
        None => streams
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .ok_or(Error::Empty("sensor streams")),
    }
}

/// Aligns, votes and finalizes the streams of `dir`.
pub fn ingest_dir(dir: &Path, base: Option<&str>) -> Result<TelemetryTable> {
    let mut streams = load_streams(dir)?;
    let b = choose_base(&streams, base)?;
    let base_stream = streams.remove(b);
    finalize(asof_align(&base_stream, &streams)?)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Checks every `hex  file` line of a manifest against files in `dir`.
pub fn verify_checksums(dir: &Path, manifest: &Path) -> Result<()> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut parts = line.split_whitespace();
        let (Some(expected), Some(file)) = (parts.next(), parts.next()) else {
            return Err(Error::Parse {
                path: manifest.to_path_buf(),
                msg: format!("line {}: expected `<sha256>  <file>`", n + 1),
            });
        };
        let path = dir.join(file.trim_start_matches('*'));
        let actual = sha256_file(&path)?;
        if !actual.eq_ignore_ascii_case(expected) {
            return Err(Error::Checksum {
                path,
                expected: expected.to_string(),
                actual,
            });
        }
    }
    Ok(())
}
