//! Std companion to `mbe-core`: configuration files, the MBEF field format, run
//! directories, SVG plots, threaded scans and the verification suites behind the CLI.

pub mod config;
pub mod mbef;
pub mod persist;
pub mod plot;
pub mod scan;
pub mod suites;
pub mod verify;

#[cfg(test)]
mod testutil;

use std::path::Path;
use std::time::Instant;

use anyhow::Result;
use mbe_core::solver::Trajectory;

pub use config::ExperimentConfig;

/// Runs `cfg` and persists it into `out` (or the configured output directory).
pub fn simulate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(Trajectory, persist::Meta)> {
    let exp = cfg.experiment();
    let start = Instant::now();
    let traj = exp.run()?;
    let wall = start.elapsed().as_secs_f64();
    let dir = out.unwrap_or(&cfg.output_dir);
    let meta = persist::save_run(dir, cfg, &traj, wall)?;
    Ok((traj, meta))
}
