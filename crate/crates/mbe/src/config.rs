//! Experiment configuration: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mbe_core::currents::CurrentModel;
use mbe_core::harness::{Experiment, Family, FitWindow, InitialData};
use mbe_core::solver::{model_exponent, SolverConfig};
use mbe_core::GridSpec;
use serde::{Deserialize, Serialize};

fn default_grid() -> GridSpec {
    GridSpec::new(2, 64, 40.0).expect("default grid is valid")
}
fn default_model() -> CurrentModel {
    CurrentModel::power_law(3.0)
}
fn default_initial() -> InitialData {
    InitialData { family: Family::GaussianBump, amplitude: 0.1, seed: 1, width: None }
}
fn default_horizon() -> f64 {
    10.0
}
fn default_output() -> PathBuf {
    PathBuf::from("runs/default")
}

/// A single run.
///
/// | field | default |
/// |---|---|
/// | `grid` | `{dim: 2, n: 64, length: 40}` |
/// | `model` | `{kind: "power_law", q: 3}` |
/// | `initial` | `{family: "gaussian_bump", amplitude: 0.1, seed: 1}` |
/// | `horizon` | `10` |
/// | `solver` | picard_duhamel, `step 0.01`, see [`SolverConfig`] |
/// | `output_dir` | `runs/default` |
/// | `window` | `max(10h, 0.05T)..T` when absent |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default = "default_model")]
    pub model: CurrentModel,
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub window: Option<FitWindow>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("parsing experiment config")?;
        cfg.experiment().validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    /// `p = d(q−1)/2`.
    pub fn p(&self) -> Result<f64> {
        Ok(model_exponent(self.grid.dim(), self.model.q())?)
    }

    pub fn experiment(&self) -> Experiment {
        Experiment {
            grid: self.grid,
            model: self.model.clone(),
            initial: self.initial.clone(),
            horizon: self.horizon,
            solver: self.solver.clone(),
            window: self.window,
        }
    }
}
