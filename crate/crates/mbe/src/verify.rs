//! Verdicts and plots for a persisted run directory.

use std::fs;
use std::path::Path;

use anyhow::Result;
use mbe_core::harness::{
    check_coarseness, check_gradient_bounds, check_growth, check_interpolated_decay, exponent_chain, CoarsenessReport,
    DecayFit, ExponentChain, FitWindow, GradientBoundReport, GrowthReport, InterpolatedDecayReport, RunSummary,
    BOUNDED_FACTOR, GROWTH_DECADES, SLOPE_TOLERANCE,
};
use mbe_core::solver::{track_grad, track_u, TRACK_COARSENESS};
use serde::{Deserialize, Serialize};

use crate::persist::{load_run, write_json, LoadedRun};
use crate::plot::{line_chart, Series};

/// A check result, or why it does not apply to this run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Check<T> {
    Done { report: T },
    Skipped { reason: String },
}

impl<T> Check<T> {
    fn from(r: mbe_core::Result<T>) -> Self {
        match r {
            Ok(report) => Check::Done { report },
            Err(e) => Check::Skipped { reason: e.to_string() },
        }
    }

    pub fn report(&self) -> Option<&T> {
        match self {
            Check::Done { report } => Some(report),
            Check::Skipped { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub bounded_factor: f64,
    pub slope_tolerance: f64,
    pub growth_decades: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub completed: bool,
    pub window: FitWindow,
    pub thresholds: Thresholds,
    pub gradient: Check<GradientBoundReport>,
    pub interpolated: Vec<Check<InterpolatedDecayReport>>,
    pub growth: Check<GrowthReport>,
    pub exponent_chain: Check<ExponentChain>,
    pub coarseness: Check<CoarsenessReport>,
}

/// Interpolation parameters whose `p_θ` is a recorded track: `p_θ = pq`, and `p_θ = 2` when `p < 2`.
pub fn default_thetas(p: f64, q: f64) -> Vec<f64> {
    let mut t = vec![1.0 - 1.0 / q];
    if p < 2.0 {
        t.push(1.0 - p / 2.0);
    }
    t
}

pub fn verify_summary(run: &RunSummary, window: Option<FitWindow>) -> VerifyReport {
    let window = window.unwrap_or_else(|| run.default_window());
    VerifyReport {
        dim: run.dim,
        p: run.p,
        q: run.q,
        completed: run.completed,
        window,
        thresholds: Thresholds {
            bounded_factor: BOUNDED_FACTOR,
            slope_tolerance: SLOPE_TOLERANCE,
            growth_decades: GROWTH_DECADES,
        },
        gradient: Check::from(check_gradient_bounds(run, window)),
        interpolated: default_thetas(run.p, run.q)
            .into_iter()
            .map(|th| Check::from(check_interpolated_decay(run, th, window)))
            .collect(),
        growth: Check::from(check_growth(run, window)),
        exponent_chain: Check::from(exponent_chain(run.dim, run.q)),
        coarseness: Check::from(check_coarseness(run, window)),
    }
}

fn fit_line(fit: &DecayFit, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| (fit.intercept + fit.slope * x.ln()).exp()).collect()
}

/// One log-log chart per fitted track, named `<track>.svg`, with the fit dashed.
pub fn write_plots(dir: &Path, run: &RunSummary, report: &VerifyReport) -> Result<Vec<String>> {
    let mut fits: Vec<(String, Option<DecayFit>)> = vec![
        (track_grad(f64::INFINITY), None),
        (track_grad(run.p), None),
        (track_u(run.p), report.growth.report().map(|g| g.lp.clone())),
        (track_u(f64::INFINITY), report.growth.report().map(|g| g.linf.clone())),
        (TRACK_COARSENESS.to_string(), report.coarseness.report().map(|c| c.fit.clone())),
    ];
    for c in report.interpolated.iter().filter_map(Check::report) {
        fits.push((c.fit.track.clone(), Some(c.fit.clone())));
    }
    fits.dedup_by(|a, b| a.0 == b.0);
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (track, fit) in fits {
        let Ok(values) = run.norms.track(&track) else { continue };
        let growth = fit.as_ref().is_some_and(|f| f.abscissa == mbe_core::harness::Abscissa::OnePlusT);
        let xs: Vec<f64> = if growth { run.norms.t.iter().map(|t| 1.0 + t).collect() } else { run.norms.t.clone() };
        let mut series = vec![Series { label: &track, x: &xs, y: values, dashed: false }];
        let fitted;
        let fx: Vec<f64>;
        let label;
        if let Some(f) = &fit {
            fx = xs.iter().copied().filter(|x| {
                let t = if growth { x - 1.0 } else { *x };
                t >= f.window.t_min && t <= f.window.t_max
            }).collect();
            fitted = fit_line(f, &fx);
            label = format!("fit slope {:.4}", f.slope);
            series.push(Series { label: &label, x: &fx, y: &fitted, dashed: true });
        }
        let x_label = if growth { "1 + t" } else { "t" };
        let svg = line_chart(&track, x_label, &track, &series, true);
        let name = format!("{track}.svg");
        fs::write(dir.join(&name), svg)?;
        written.push(name);
    }
    Ok(written)
}

pub const VERIFY_FILE: &str = "verify.json";
pub const PLOT_DIR: &str = "plots";

/// Recomputes `verify.json` and the plots of a run directory.
pub fn report_run(dir: &Path, window: Option<FitWindow>) -> Result<(LoadedRun, VerifyReport)> {
    let run = load_run(dir)?;
    let report = verify_summary(&run.summary, window.or(run.meta.config.window));
    write_json(&dir.join(VERIFY_FILE), &report)?;
    write_plots(&dir.join(PLOT_DIR), &run.summary, &report)?;
    Ok((run, report))
}
