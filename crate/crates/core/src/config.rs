//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audit::{FeatureMode, ModeLists};
use crate::error::{Error, Result};
use crate::ingest::{synth_generate, SynthSpec};
use crate::protocol::{ModelId, PipelineConfig};
use crate::table::TelemetryTable;

/// Every field has a default; an empty file is a valid configuration that
/// runs the synthetic table over seeds 0..=9, all modes and all models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Canonical table CSV. When absent the synthetic generator is used.
    pub dataset: Option<PathBuf>,
    pub synth: SynthSpec,
    pub synth_seed: u64,
    pub seeds: Vec<u64>,
    pub modes: Vec<FeatureMode>,
    pub model_set: Vec<ModelId>,
    /// Multiclass labels kept before binarization; `None` keeps all.
    pub labels: Option<Vec<u8>>,
    /// Replacement for the bundled feature-mode lists.
    pub mode_lists: Option<PathBuf>,
    pub out: PathBuf,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    pub pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            synth: SynthSpec::default(),
            synth_seed: 0,
            seeds: (0..10).collect(),
            modes: FeatureMode::ALL.to_vec(),
            model_set: ModelId::ALL.to_vec(),
            labels: None,
            mode_lists: None,
            out: PathBuf::from("results"),
            jobs: None,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl RunConfig {
    /// Normal vs motor anomaly over 20 blocks.
    pub fn fault3() -> Self {
        let mut c = Self {
            labels: Some(vec![0, 3]),
            ..Self::default()
        };
        c.pipeline.k = 20;
        c
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_toml_str(&text)?;
        // relative paths resolve against the config file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.dataset, &mut c.mode_lists].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() || self.modes.is_empty() || self.model_set.is_empty() {
            return bad("seeds, modes and model_set must be non-empty".into());
        }
        if self.pipeline.k < 3 {
            return bad(format!("k = {} leaves no room for three splits", self.pipeline.k));
        }
        if self.pipeline.dru.n_qubits != self.pipeline.top_k {
            return bad(format!(
                "DRU width {} must equal top_k {}",
                self.pipeline.dru.n_qubits, self.pipeline.top_k
            ));
        }
        if let Some(l) = &self.labels {
            if !l.contains(&0) || !l.iter().any(|&v| v != 0) || l.iter().any(|&v| v > 4) {
                return bad("label filter must keep 0 and at least one fault label in 1..=4".into());
            }
        }
        if self.jobs == Some(0) {
            return bad("jobs must be at least 1".into());
        }
        let mut seen = Vec::new();
        for s in &self.seeds {
            if seen.contains(s) {
                return bad(format!("seed {s} listed twice"));
            }
            seen.push(*s);
        }
        Ok(())
    }

    pub fn mode_lists(&self) -> Result<ModeLists> {
        match &self.mode_lists {
            Some(p) => ModeLists::load(p),
            None => Ok(ModeLists::builtin()),
        }
    }

    /// Dataset or synthetic table, after the label filter.
    pub fn load_table(&self) -> Result<TelemetryTable> {
        let table = match &self.dataset {
            Some(p) => TelemetryTable::read_csv(p)?,
            None => synth_generate(&self.synth, self.synth_seed)?,
        };
        Ok(match &self.labels {
            Some(keep) => table.filter_labels(keep),
            None => table,
        })
    }
}
