//! Shared fixtures for unit tests.

use crate::ExperimentConfig;

/// 1D power-law run, q = 4, etd2 with h = 0.01.
pub fn small_config(horizon: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(
        r#"{"grid": {"dim": 1, "n": 64, "length": 40}, "model": {"kind": "power_law", "q": 4},
            "initial": {"family": "gaussian_bump", "amplitude": 0.2},
            "solver": {"scheme": "etd2", "step": 0.01}}"#,
    )
    .unwrap();
    cfg.horizon = horizon;
    cfg
}
