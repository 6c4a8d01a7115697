//! JSON checkpoints. Floats are written in shortest round-trip form, so a
//! resumed run continues bit for bit.

use crate::config::{ConfigError, ConfigFile, OutputSection};
use crate::diagnostics::{BlowupMonitor, DiagnosticsSeries};
use crate::field::{GridError, GridSpec, ScalarField};
use crate::scheme::{PicardRecord, SimConfig, SimState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint format version {found}, expected {FORMAT_VERSION}")]
    Version { found: u32 },
    #[error("checkpoint state hash mismatch: stored {stored}, computed {computed}")]
    Hash { stored: String, computed: String },
    #[error("checkpoint was written for a different configuration ({0})")]
    ConfigMismatch(&'static str),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ConfigFile,
    pub step: usize,
    pub t: f64,
    pub grid: GridSpec,
    pub field_time: f64,
    pub values: Vec<f64>,
    pub diagnostics: DiagnosticsSeries,
    pub picard_history: Vec<PicardRecord>,
    pub monitor: BlowupMonitor,
    pub seminorm_integral: f64,
    pub initial_plateau: f64,
    pub clamped: usize,
    /// SHA-256 over the step, time and field values.
    pub state_hash: String,
}

/// Hex SHA-256 of the evolving state.
pub fn state_hash(step: usize, t: f64, values: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((step as u64).to_le_bytes());
    h.update(t.to_le_bytes());
    for v in values {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn capture(state: &SimState, cfg: &SimConfig, output: &OutputSection) -> Self {
        let values = state.omega.values().to_vec();
        Self {
            format_version: FORMAT_VERSION,
            config: ConfigFile::from_sim(cfg, output),
            step: state.step,
            t: state.t,
            grid: *state.omega.grid(),
            field_time: state.omega.time(),
            state_hash: state_hash(state.step, state.t, &values),
            values,
            diagnostics: state.diagnostics.clone(),
            picard_history: state.picard_history.clone(),
            monitor: state.monitor,
            seminorm_integral: state.seminorm_integral,
            initial_plateau: state.initial_plateau,
            clamped: state.clamped,
        }
    }

    /// Configuration the checkpoint was written with.
    pub fn sim_config(&self) -> Result<SimConfig, CheckpointError> {
        Ok(self.config.to_sim(None)?)
    }

    /// Restores the state, checking it belongs to `cfg`.
    pub fn restore(&self, cfg: &SimConfig) -> Result<SimState, CheckpointError> {
        let saved = self.sim_config()?;
        if saved.grid != cfg.grid {
            return Err(CheckpointError::ConfigMismatch("grid"));
        }
        if saved.kernel != cfg.kernel || saved.geom != cfg.geom {
            return Err(CheckpointError::ConfigMismatch("kernel or obstacle"));
        }
        if saved.motion != cfg.motion || saved.frame != cfg.frame || saved.dt != cfg.dt {
            return Err(CheckpointError::ConfigMismatch("motion or time step"));
        }
        Ok(SimState {
            omega: ScalarField::new(self.grid, self.values.clone(), self.field_time)?,
            step: self.step,
            t: self.t,
            diagnostics: self.diagnostics.clone(),
            picard_history: self.picard_history.clone(),
            monitor: self.monitor,
            seminorm_integral: self.seminorm_integral,
            initial_plateau: self.initial_plateau,
            clamped: self.clamped,
        })
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, CheckpointError> {
        let c: Self = serde_json::from_str(s)?;
        if c.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version { found: c.format_version });
        }
        let computed = state_hash(c.step, c.t, &c.values);
        if computed != c.state_hash {
            return Err(CheckpointError::Hash { stored: c.state_hash, computed });
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |source| CheckpointError::Io { path: path.to_path_buf(), source };
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()?).map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let s = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&s)
    }
}
