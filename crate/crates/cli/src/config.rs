use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use timebin_core::correction::PhaseBudget;
use timebin_core::estimation::{FitOptions, RelativePhaseSet};
use timebin_core::state::{DensityMatrixDoc, TimeBinState};
use timebin_core::tomography::PairSelection;

/// Config parse or load failure; mapped to its own exit code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// Either an inline JSON value or a path (relative to the config file) to a JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(String),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Source<T> {
    pub fn load(&self, base: &Path) -> anyhow::Result<T> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::Path(p) => read_json(&base.join(p)),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("invalid JSON in {}: {e}", path.display())).into())
}

pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

fn default_points() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub state: Source<TimeBinState>,
    pub budget: Source<PhaseBudget>,
    /// Reference whose own adjacent offsets count as zero phase error; flat when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Source<TimeBinState>>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub reference_bin: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectConfig {
    pub relative_phases: Source<RelativePhaseSet>,
    /// Perturbed state to correct.
    pub state: Source<TimeBinState>,
    /// Defaults to the flat-phase state with the same magnitudes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Source<TimeBinState>>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomoInput {
    State(Source<TimeBinState>),
    DensityMatrix(Source<DensityMatrixDoc>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TomoConfig {
    #[serde(flatten)]
    pub input: TomoInput,
    #[serde(default)]
    pub pairs: PairSelection,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier_shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fit: FitOptions,
}
