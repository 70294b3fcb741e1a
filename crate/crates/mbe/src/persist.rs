//! Run directories: `norms.csv`, `snapshots/*.mbef`, `meta.json`.
//!
//! Numbers are written in shortest round-trip form, so a reloaded series is
//! bit-identical to the one in memory and verdicts recomputed from disk match.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use mbe_core::harness::RunSummary;
use mbe_core::solver::{NormSeries, Termination, Trajectory, SHELL_WARNING, TAIL_WARNING};
use mbe_core::Field;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::mbef;

pub const NORMS_FILE: &str = "norms.csv";
pub const META_FILE: &str = "meta.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guards {
    pub mean_drift: f64,
    pub max_shell_ratio: f64,
    pub shell_limit: f64,
    pub max_tail: f64,
    pub tail_limit: f64,
    pub max_picard_iterations: usize,
    pub max_contraction_ratio: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    /// Resolved configuration, defaults filled in.
    pub config: ExperimentConfig,
    pub p: f64,
    pub q: f64,
    pub termination: Termination,
    pub final_time: f64,
    pub steps: usize,
    pub guards: Guards,
    pub wall_seconds: f64,
    pub snapshots: Vec<SnapshotEntry>,
}

impl Meta {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }
}

pub fn write_norms(path: &Path, s: &NormSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(s.columns.keys().cloned());
    w.write_record(&header)?;
    for (i, t) in s.t.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(s.columns.values().map(|c| c[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_norms(path: &Path) -> Result<NormSeries> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    ensure!(header.first().map(String::as_str) == Some("t"), "first column of {} must be t", path.display());
    let mut s = NormSeries::default();
    for name in &header[1..] {
        s.columns.insert(name.clone(), Vec::new());
    }
    for rec in r.records() {
        let rec = rec?;
        ensure!(rec.len() == header.len(), "ragged row in {}", path.display());
        let vals = rec.iter().map(|x| x.parse::<f64>().with_context(|| format!("bad number {x:?}"))).collect::<Result<Vec<_>>>()?;
        s.t.push(vals[0]);
        for (name, v) in header[1..].iter().zip(&vals[1..]) {
            s.columns.get_mut(name).expect("column registered").push(*v);
        }
    }
    Ok(s)
}

fn snapshot_name(index: usize) -> String {
    format!("snap_{index:05}.mbef")
}

/// Writes a run into `dir`, creating it if needed.
pub fn save_run(dir: &Path, cfg: &ExperimentConfig, traj: &Trajectory, wall_seconds: f64) -> Result<Meta> {
    let snap_dir = dir.join(SNAPSHOT_DIR);
    fs::create_dir_all(&snap_dir).with_context(|| format!("creating {}", snap_dir.display()))?;
    write_norms(&dir.join(NORMS_FILE), &traj.norms)?;
    let mut snapshots = Vec::new();
    for (i, s) in traj.snapshots.iter().enumerate() {
        let file = snapshot_name(i);
        let mut w = BufWriter::new(File::create(snap_dir.join(&file))?);
        mbef::write_field(&mut w, &s.field, s.t)?;
        w.flush()?;
        snapshots.push(SnapshotEntry { file, t: s.t });
    }
    let meta = Meta {
        config: cfg.clone(),
        p: traj.p,
        q: traj.q,
        termination: traj.termination.clone(),
        final_time: traj.final_time(),
        steps: traj.times.len().saturating_sub(1),
        guards: Guards {
            mean_drift: traj.mean_drift,
            max_shell_ratio: traj.max_shell_ratio,
            shell_limit: SHELL_WARNING,
            max_tail: traj.max_tail,
            tail_limit: TAIL_WARNING,
            max_picard_iterations: traj.max_picard_iterations,
            max_contraction_ratio: traj.max_contraction_ratio,
            warnings: traj.warnings.clone(),
        },
        wall_seconds,
        snapshots,
    };
    write_json(&dir.join(META_FILE), &meta)?;
    Ok(meta)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    serde_json::from_reader(r).with_context(|| format!("parsing {}", path.display()))
}

pub struct LoadedRun {
    pub dir: PathBuf,
    pub meta: Meta,
    pub summary: RunSummary,
}

impl LoadedRun {
    pub fn snapshot(&self, index: usize) -> Result<(Field, f64)> {
        let entry = self.meta.snapshots.get(index).with_context(|| format!("no snapshot {index}"))?;
        mbef::read_field(BufReader::new(File::open(self.dir.join(SNAPSHOT_DIR).join(&entry.file))?))
    }
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let meta: Meta = read_json(&dir.join(META_FILE))?;
    let norms = read_norms(&dir.join(NORMS_FILE))?;
    let summary = RunSummary {
        dim: meta.config.grid.dim(),
        p: meta.p,
        q: meta.q,
        horizon: meta.config.horizon,
        step: meta.config.solver.step,
        completed: meta.completed(),
        norms,
    };
    Ok(LoadedRun { dir: dir.to_path_buf(), meta, summary })
}
