//! Initial data, exponent fits and the decay/growth/coarsening verdicts.
//!
//! Verdicts bound norms from above and never require slope equality: a run that
//! decays faster than the worst case passes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_rational::Ratio;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::currents::CurrentModel;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::GridSpec;
use crate::solver::{
    model_exponent, solve, track_grad, track_u, NormSeries, SolverConfig, Termination, Trajectory, TRACK_COARSENESS,
};
use crate::spectral::{lp_norm, spectral_gradient};
use crate::stats::{fit_loglog, LineFit};

/// A compensated track may rise at most this factor above its early-window value.
pub const BOUNDED_FACTOR: f64 = 1.1;
/// Slack added to every theoretical slope bound.
pub const SLOPE_TOLERANCE: f64 = 0.05;
/// The early part of a fit window is `[t_min, EARLY_SPAN · t_min]`.
pub const EARLY_SPAN: f64 = 2.0;
/// The `‖∇u‖_{L^p}` reference is its running max over the first tenth of the horizon.
pub const EARLY_HORIZON_FRACTION: f64 = 0.1;
pub const MIN_FIT_SAMPLES: usize = 20;
/// Decades a growth window must span.
pub const GROWTH_DECADES: f64 = 1.5;

// ---------------------------------------------------------------- initial data

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Mean-zero difference of Gaussians, width `σ = L/40`.
    GaussianBump,
    /// Random plane waves under a Gaussian window of width `L/32`.
    RandomBand,
    /// Randomly signed Gaussians of width `L/48` near the centre.
    Multibump,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub family: Family,
    /// Target `‖∇u₀‖_{L^∞}`.
    pub amplitude: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Overrides the family's default length scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

struct Unit(ChaCha8Rng);

impl Unit {
    fn next(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn gauss(x: [f64; 2], c: [f64; 2], d: usize, sigma: f64) -> f64 {
    let r2: f64 = (0..d).map(|i| (x[i] - c[i]) * (x[i] - c[i])).sum();
    libm::exp(-r2 / (2.0 * sigma * sigma))
}

/// Subtracts `c·w` with `c = Σu/Σw`, leaving a discrete mean of zero and the support of `w`.
fn remove_mean_with(u: &mut [f64], w: &[f64]) {
    let c = u.iter().sum::<f64>() / w.iter().sum::<f64>();
    for (x, wi) in u.iter_mut().zip(w) {
        *x -= c * wi;
    }
}

/// A mean-zero profile supported in the central half-box, scaled so that
/// `‖∇u₀‖_{L^∞} = amplitude`.
pub fn make_initial_data(spec: &InitialData, grid: GridSpec) -> Result<Field> {
    if !(spec.amplitude > 0.0) || !spec.amplitude.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("amplitude must be positive, got {}", spec.amplitude)));
    }
    let d = grid.dim();
    let l = grid.length();
    let origin = [0.0; 2];
    let mut rng = Unit(ChaCha8Rng::seed_from_u64(spec.seed));
    let pos: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.position(i)).collect();
    let mut u: Vec<f64> = match spec.family {
        Family::GaussianBump => {
            let s = spec.width.unwrap_or(l / 40.0);
            // equal continuous masses: ∫e^{−r²/4σ²} = 2^{d/2} ∫e^{−r²/2σ²}
            let w = libm::pow(2.0, -(d as f64) / 2.0);
            let mut u: Vec<f64> =
                pos.iter().map(|x| gauss(*x, origin, d, s) - w * gauss(*x, origin, d, s * core::f64::consts::SQRT_2)).collect();
            let mean = u.iter().sum::<f64>() / u.len() as f64;
            u.iter_mut().for_each(|x| *x -= mean);
            u
        }
        Family::RandomBand => {
            let s = spec.width.unwrap_or(l / 32.0);
            let waves: Vec<([f64; 2], f64, f64)> = (0..8)
                .map(|_| {
                    let kmag = 2.0 * PI / l * (4.0 + 6.0 * rng.next());
                    let dir = 2.0 * PI * rng.next();
                    let k = if d == 1 { [kmag, 0.0] } else { [kmag * libm::cos(dir), kmag * libm::sin(dir)] };
                    (k, 2.0 * PI * rng.next(), rng.next() - 0.5)
                })
                .collect();
            let window: Vec<f64> = pos.iter().map(|x| gauss(*x, origin, d, s)).collect();
            let mut u: Vec<f64> = pos
                .iter()
                .zip(&window)
                .map(|(x, w)| w * waves.iter().map(|(k, ph, a)| a * libm::cos(k[0] * x[0] + k[1] * x[1] + ph)).sum::<f64>())
                .collect();
            remove_mean_with(&mut u, &window);
            u
        }
        Family::Multibump => {
            let s = spec.width.unwrap_or(l / 48.0);
            let count = 3 + (rng.0.next_u64() % 4) as usize;
            let bumps: Vec<([f64; 2], f64)> = (0..count)
                .map(|_| {
                    let r = l / 8.0 * libm::sqrt(rng.next());
                    let a = 2.0 * PI * rng.next();
                    let c = if d == 1 { [r * libm::cos(a), 0.0] } else { [r * libm::cos(a), r * libm::sin(a)] };
                    let sign = if rng.next() < 0.5 { -1.0 } else { 1.0 };
                    (c, sign)
                })
                .collect();
            let window: Vec<f64> = pos.iter().map(|x| gauss(*x, origin, d, l / 32.0)).collect();
            let mut u: Vec<f64> =
                pos.iter().map(|x| bumps.iter().map(|(c, sg)| sg * gauss(*x, *c, d, s)).sum::<f64>()).collect();
            remove_mean_with(&mut u, &window);
            u
        }
    };
    let profile = Field::new(grid, u.clone())?;
    let gmax = spectral_gradient(&profile)?.magnitude().max_abs();
    if !(gmax > 0.0) {
        return Err(Error::InvalidArgument("initial profile is flat".into()));
    }
    let scale = spec.amplitude / gmax;
    u.iter_mut().for_each(|x| *x *= scale);
    Field::new(grid, u)
}

// ---------------------------------------------------------------- runs and windows

/// The parts of a finished run that the verdicts read; rebuildable from persisted files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub horizon: f64,
    pub step: f64,
    pub completed: bool,
    pub norms: NormSeries,
}

impl RunSummary {
    pub fn from_trajectory(t: &Trajectory) -> Self {
        RunSummary {
            dim: t.grid.dim(),
            p: t.p,
            q: t.q,
            horizon: t.horizon,
            step: t.config.step,
            completed: t.termination == Termination::Completed,
            norms: t.norms.clone(),
        }
    }

    fn require_complete(&self) -> Result<()> {
        if self.completed && self.norms.t.last().is_some_and(|t| *t >= self.horizon * (1.0 - 1e-12)) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("trajectory did not reach its horizon".into()))
        }
    }

    /// `t_min = max(10h, 0.05T)`, `t_max = T`.
    pub fn default_window(&self) -> FitWindow {
        FitWindow { t_min: (10.0 * self.step).max(0.05 * self.horizon), t_max: self.horizon }
    }

    /// Column of `‖∇u‖_{L^p}` whose exponent matches `p` to `1e-9` relative.
    pub fn grad_track(&self, p: f64) -> Result<String> {
        find_track(&self.norms, "grad_L", p)
    }

    pub fn u_track(&self, p: f64) -> Result<String> {
        find_track(&self.norms, "u_L", p)
    }
}

fn find_track(series: &NormSeries, prefix: &str, p: f64) -> Result<String> {
    let exact = if prefix == "u_L" { track_u(p) } else { track_grad(p) };
    if series.columns.contains_key(&exact) {
        return Ok(exact);
    }
    for name in series.columns.keys() {
        if let Some(rest) = name.strip_prefix(prefix) {
            let v = if rest == "inf" { f64::INFINITY } else { rest.parse::<f64>().unwrap_or(f64::NAN) };
            if v == p || (v - p).abs() <= 1e-9 * p.abs() {
                return Ok(name.clone());
            }
        }
    }
    Err(Error::MissingTrack(exact))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_min: f64,
    pub t_max: f64,
}

impl FitWindow {
    pub fn decades(&self) -> f64 {
        libm::log10(self.t_max / self.t_min)
    }

    fn validate(&self, run: &RunSummary) -> Result<()> {
        if !(self.t_min > 0.0) || !(self.t_max > self.t_min) {
            return Err(Error::InvalidArgument(alloc::format!("bad window [{}, {}]", self.t_min, self.t_max)));
        }
        if self.t_min < 10.0 * run.step * (1.0 - 1e-12) {
            return Err(Error::InvalidArgument(alloc::format!("t_min = {} is below 10h", self.t_min)));
        }
        if self.t_max > run.horizon * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument("window extends past the horizon".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    /// Decay tracks: `log t`.
    T,
    /// Growth tracks: `log(1 + t)`.
    OnePlusT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub track: String,
    pub window: FitWindow,
    pub abscissa: Abscissa,
    pub samples: usize,
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation in log space.
    pub max_residual: f64,
    /// Theoretical slope bound, when the fit backs a verdict.
    pub bound: Option<f64>,
    /// `bound + SLOPE_TOLERANCE − slope`; non-negative means the slope passes.
    pub margin: Option<f64>,
}

impl DecayFit {
    fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self.margin = Some(bound + SLOPE_TOLERANCE - self.slope);
        self
    }

    pub fn passes(&self) -> bool {
        self.margin.is_some_and(|m| m >= 0.0)
    }
}

fn window_samples<'a>(series: &'a NormSeries, track: &str, w: &FitWindow) -> Result<(Vec<f64>, Vec<f64>)> {
    let values = series.track(track)?;
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for (t, v) in series.t.iter().zip(values) {
        if *t >= w.t_min && *t <= w.t_max {
            ts.push(*t);
            vs.push(*v);
        }
    }
    Ok((ts, vs))
}

/// Least squares of `log value` against `log t` or `log(1+t)` over the window.
pub fn fit_exponent(series: &NormSeries, track: &str, window: FitWindow, abscissa: Abscissa) -> Result<DecayFit> {
    let (ts, vs) = window_samples(series, track, &window)?;
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_FIT_SAMPLES, got: ts.len() });
    }
    let xs: Vec<f64> = match abscissa {
        Abscissa::T => ts.clone(),
        Abscissa::OnePlusT => ts.iter().map(|t| 1.0 + t).collect(),
    };
    for (t, v) in ts.iter().zip(&vs) {
        if !(*v > 0.0) {
            return Err(Error::NonPositiveSample { t: *t, value: *v });
        }
    }
    let LineFit { slope, intercept, max_residual } = fit_loglog(&xs, &vs)?;
    Ok(DecayFit {
        track: track.to_string(),
        window,
        abscissa,
        samples: ts.len(),
        slope,
        intercept,
        max_residual,
        bound: None,
        margin: None,
    })
}

/// Boundedness of `t^α · track(t)` on the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatedTrack {
    pub track: String,
    pub alpha: f64,
    /// `max` over `[t_min, EARLY_SPAN·t_min]`.
    pub early: f64,
    /// `max` over the rest of the window.
    pub later: f64,
    /// `later / early`; the track is bounded when this is at most [`BOUNDED_FACTOR`].
    pub ratio: f64,
    pub bounded: bool,
}

pub fn compensated_track(series: &NormSeries, track: &str, alpha: f64, window: FitWindow) -> Result<CompensatedTrack> {
    let (ts, vs) = window_samples(series, track, &window)?;
    if ts.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: ts.len() });
    }
    let cut = EARLY_SPAN * window.t_min;
    let (mut early, mut later) = (0.0f64, 0.0f64);
    for (t, v) in ts.iter().zip(&vs) {
        let c = libm::pow(*t, alpha) * v;
        if *t <= cut {
            early = early.max(c);
        } else {
            later = later.max(c);
        }
    }
    let ratio = if early > 0.0 { later / early } else if later > 0.0 { f64::INFINITY } else { 0.0 };
    Ok(CompensatedTrack { track: track.to_string(), alpha, early, later, ratio, bounded: ratio <= BOUNDED_FACTOR })
}

/// `‖∇u‖_{L^p}` against its running max over the first tenth of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningMaxCheck {
    pub track: String,
    pub early_max: f64,
    pub later_max: f64,
    pub ratio: f64,
    pub bounded: bool,
}

fn running_max_check(series: &NormSeries, track: &str, horizon: f64) -> Result<RunningMaxCheck> {
    let values = series.track(track)?;
    let cut = EARLY_HORIZON_FRACTION * horizon;
    let (mut early, mut later) = (0.0f64, 0.0f64);
    for (t, v) in series.t.iter().zip(values) {
        if *t <= cut {
            early = early.max(*v);
        } else {
            later = later.max(*v);
        }
    }
    let ratio = if early > 0.0 { later / early } else if later > 0.0 { f64::INFINITY } else { 0.0 };
    Ok(RunningMaxCheck { track: track.to_string(), early_max: early, later_max: later, ratio, bounded: ratio <= BOUNDED_FACTOR })
}

// ---------------------------------------------------------------- gradient bounds

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundReport {
    pub dim: usize,
    pub p: f64,
    /// `d/(4p)`.
    pub alpha: f64,
    pub window: FitWindow,
    /// `sup_t ‖∇u‖_{L^p} + t^α‖∇u‖_{L^∞}` over the recorded times.
    pub m: f64,
    /// `sup_t t^α ‖∇u‖_{L^∞}` on the window.
    pub c1_estimate: f64,
    /// `sup_t ‖∇u‖_{L^p}`.
    pub c2_estimate: f64,
    pub compensated: CompensatedTrack,
    pub lp: RunningMaxCheck,
    pub pass: bool,
}

pub fn check_gradient_bounds(run: &RunSummary, window: FitWindow) -> Result<GradientBoundReport> {
    run.require_complete()?;
    window.validate(run)?;
    let alpha = run.dim as f64 / (4.0 * run.p);
    let inf_track = run.grad_track(f64::INFINITY)?;
    let p_track = run.grad_track(run.p)?;
    let ginf = run.norms.track(&inf_track)?;
    let gp = run.norms.track(&p_track)?;
    let m = run
        .norms
        .t
        .iter()
        .zip(ginf.iter().zip(gp))
        .map(|(t, (a, b))| b + libm::pow(*t, alpha) * a)
        .fold(0.0, f64::max);
    let c1_estimate = run
        .norms
        .t
        .iter()
        .zip(ginf)
        .filter(|(t, _)| **t >= window.t_min && **t <= window.t_max)
        .map(|(t, v)| libm::pow(*t, alpha) * v)
        .fold(0.0, f64::max);
    let c2_estimate = gp.iter().copied().fold(0.0, f64::max);
    let compensated = compensated_track(&run.norms, &inf_track, alpha, window)?;
    let lp = running_max_check(&run.norms, &p_track, run.horizon)?;
    let pass = compensated.bounded && lp.bounded;
    Ok(GradientBoundReport { dim: run.dim, p: run.p, alpha, window, m, c1_estimate, c2_estimate, compensated, lp, pass })
}

// ---------------------------------------------------------------- interpolated decay

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolatedDecayReport {
    pub theta: f64,
    /// `p/(1−θ)`.
    pub p_theta: f64,
    pub fit: DecayFit,
    pub compensated: CompensatedTrack,
    pub pass: bool,
}

/// Decay of `‖∇u‖_{L^{p_θ}}` at the rate `t^{−dθ/(4p)}`.
pub fn check_interpolated_decay(run: &RunSummary, theta: f64, window: FitWindow) -> Result<InterpolatedDecayReport> {
    run.require_complete()?;
    window.validate(run)?;
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidArgument(alloc::format!("theta = {theta} outside [0, 1)")));
    }
    let p_theta = run.p / (1.0 - theta);
    let track = run.grad_track(p_theta)?;
    let rate = run.dim as f64 * theta / (4.0 * run.p);
    let fit = fit_exponent(&run.norms, &track, window, Abscissa::T)?.with_bound(-rate);
    let compensated = compensated_track(&run.norms, &track, rate, window)?;
    let pass = fit.passes() || compensated.bounded;
    Ok(InterpolatedDecayReport { theta, p_theta, fit, compensated, pass })
}

// ---------------------------------------------------------------- growth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// `‖u‖_{L^p}` against `(1+t)^{1/4}`.
    pub lp: DecayFit,
    /// `‖u‖_{L^∞}` against `(1+t)^{3/4 − d/(4p)}`.
    pub linf: DecayFit,
    pub pass: bool,
}

pub fn check_growth(run: &RunSummary, window: FitWindow) -> Result<GrowthReport> {
    run.require_complete()?;
    window.validate(run)?;
    if window.decades() < GROWTH_DECADES - 1e-12 {
        return Err(Error::InvalidArgument(alloc::format!(
            "growth window spans {:.3} decades, need {GROWTH_DECADES}",
            window.decades()
        )));
    }
    let lp = fit_exponent(&run.norms, &run.u_track(run.p)?, window, Abscissa::OnePlusT)?.with_bound(0.25);
    let linf_bound = 0.75 - run.dim as f64 / (4.0 * run.p);
    let linf = fit_exponent(&run.norms, &run.u_track(f64::INFINITY)?, window, Abscissa::OnePlusT)?.with_bound(linf_bound);
    let pass = lp.passes() && linf.passes();
    Ok(GrowthReport { lp, linf, pass })
}

// ---------------------------------------------------------------- coarsening

/// Exact exponent arithmetic `q → p → θ → bound` in rationals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentChain {
    pub d: usize,
    pub q: String,
    /// Open admissible interval for `q`.
    pub window: [String; 2],
    pub q_in_window: bool,
    /// `d(q−1)/2`.
    pub p: String,
    /// `d(1/p − 1/2)`.
    pub theta: String,
    /// `1/4 − d/(4p) + d/8`.
    pub bound: String,
    pub bound_value: f64,
    /// `1/2 − 1/p` for `d = 2`.
    pub d2_remark: Option<String>,
    pub d2_remark_value: Option<f64>,
    /// Whether the general bound equals the `d = 2` remark exactly.
    pub d2_identity_holds: Option<bool>,
}

type Q = Ratio<i64>;

fn to_f64(r: Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn show(r: Q) -> String {
    if *r.denom() == 1 {
        alloc::format!("{}", r.numer())
    } else {
        alloc::format!("{}/{}", r.numer(), r.denom())
    }
}

/// The rational with denominator at most 1000 that equals `x` to `1e-12`.
pub fn rational_from(x: f64) -> Result<Q> {
    for den in 1..=1000i64 {
        let num = libm::round(x * den as f64);
        if (num / den as f64 - x).abs() <= 1e-12 * x.abs().max(1.0) {
            return Ok(Q::new(num as i64, den));
        }
    }
    Err(Error::InvalidArgument(alloc::format!("{x} is not a simple rational")))
}

pub fn exponent_chain(d: usize, q: f64) -> Result<ExponentChain> {
    let dq = Q::from_integer(d as i64);
    let one = Q::from_integer(1);
    let two = Q::from_integer(2);
    let qr = rational_from(q)?;
    let lo = core::cmp::max(one + two / dq, (Q::from_integer(6) + dq) / (two + dq));
    let hi = one + Q::from_integer(4) / dq;
    let p = dq * (qr - one) / two;
    if p <= Q::from_integer(0) {
        return Err(Error::InvalidExponent(to_f64(p)));
    }
    let theta = dq * (one / p - one / two);
    let bound = Q::new(1, 4) - dq / (Q::from_integer(4) * p) + dq / Q::from_integer(8);
    let remark = (d == 2).then(|| one / two - one / p);
    Ok(ExponentChain {
        d,
        q: show(qr),
        window: [show(lo), show(hi)],
        q_in_window: qr > lo && qr < hi,
        p: show(p),
        theta: show(theta),
        bound: show(bound),
        bound_value: to_f64(bound),
        d2_remark: remark.map(show),
        d2_remark_value: remark.map(to_f64),
        d2_identity_holds: remark.map(|r| r == bound),
    })
}

impl core::fmt::Display for ExponentChain {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "d = {}, q = {} in ({}, {}): p = d(q-1)/2 = {}, theta = d(1/p - 1/2) = {}, bound = 1/4 - d/(4p) + d/8 = {}",
            self.d, self.q, self.window[0], self.window[1], self.p, self.theta, self.bound
        )?;
        if let (Some(r), Some(h)) = (&self.d2_remark, self.d2_identity_holds) {
            write!(f, "; d = 2 form 1/2 - 1/p = {r}; equal: {h}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarsenessReport {
    pub chain: ExponentChain,
    pub fit: DecayFit,
    /// Verdict against `1/4 − d/(4p) + d/8 + tolerance`.
    pub pass: bool,
    /// Verdict against the `d = 2` form `1/2 − 1/p + tolerance`.
    pub pass_d2_remark: Option<bool>,
}

pub fn check_coarseness(run: &RunSummary, window: FitWindow) -> Result<CoarsenessReport> {
    let chain = exponent_chain(run.dim, run.q)?;
    if !chain.q_in_window {
        let d = run.dim as f64;
        return Err(Error::OutsideWindow { q: run.q, lo: (1.0 + 2.0 / d).max((6.0 + d) / (2.0 + d)), hi: 1.0 + 4.0 / d });
    }
    run.require_complete()?;
    window.validate(run)?;
    let fit = fit_exponent(&run.norms, TRACK_COARSENESS, window, Abscissa::OnePlusT)?.with_bound(chain.bound_value);
    let pass = fit.passes();
    let pass_d2_remark = chain.d2_remark_value.map(|r| fit.slope <= r + SLOPE_TOLERANCE);
    Ok(CoarsenessReport { chain, fit, pass, pass_d2_remark })
}

// ---------------------------------------------------------------- amplitude scans

/// One experiment: initial data, model, grid, solver and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub grid: GridSpec,
    pub model: CurrentModel,
    pub initial: InitialData,
    pub horizon: f64,
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<FitWindow>,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.solver.validate()?;
        model_exponent(self.grid.dim(), self.model.q())?;
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if let Some(w) = self.window {
            if w.t_min < 10.0 * self.solver.step || w.t_max > self.horizon || !(w.t_max > w.t_min) {
                return Err(Error::InvalidArgument("fit window must satisfy 10h <= t_min < t_max <= T".into()));
            }
        }
        Ok(())
    }

    pub fn initial_field(&self) -> Result<Field> {
        make_initial_data(&self.initial, self.grid)
    }

    pub fn run(&self) -> Result<Trajectory> {
        self.validate()?;
        solve(&self.initial_field()?, self.horizon, &self.model, &self.solver)
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        let mut e = self.clone();
        e.initial.amplitude = amplitude;
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub amplitude: f64,
    /// `‖∇u₀‖_{L^p}`.
    pub grad_lp0: f64,
    pub termination: Termination,
    pub m: Option<f64>,
    pub pass: bool,
    /// No boundary-shell or spectral-tail warning was raised.
    pub guards_clean: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub entries: Vec<ScanEntry>,
    /// Largest passing `‖∇u₀‖_{L^p}` below every failure.
    pub largest_pass: Option<f64>,
    pub smallest_fail: Option<f64>,
    /// Every pass precedes every failure.
    pub monotone: bool,
}

/// Runs one amplitude of a scan; failures and blow-ups are outcomes, not errors.
pub fn scan_entry(template: &Experiment, amplitude: f64) -> Result<ScanEntry> {
    let exp = template.with_amplitude(amplitude);
    exp.validate()?;
    let u0 = exp.initial_field()?;
    let p = model_exponent(exp.grid.dim(), exp.model.q())?;
    let grad_lp0 = lp_norm(&spectral_gradient(&u0)?.magnitude(), p)?;
    let traj = solve(&u0, exp.horizon, &exp.model, &exp.solver)?;
    let run = RunSummary::from_trajectory(&traj);
    let (pass, m) = if run.completed {
        let report = check_gradient_bounds(&run, exp.window.unwrap_or_else(|| run.default_window()))?;
        (report.pass, Some(report.m))
    } else {
        (false, None)
    };
    Ok(ScanEntry { amplitude, grad_lp0, termination: traj.termination, m, pass, guards_clean: traj.warnings.is_empty() })
}

/// Orders entries by amplitude and brackets the pass/fail transition.
pub fn assemble_scan(mut entries: Vec<ScanEntry>) -> ScanReport {
    entries.sort_by(|a, b| a.amplitude.partial_cmp(&b.amplitude).unwrap_or(core::cmp::Ordering::Equal));
    let first_fail = entries.iter().position(|e| !e.pass);
    let smallest_fail = first_fail.map(|i| entries[i].grad_lp0);
    let largest_pass = entries[..first_fail.unwrap_or(entries.len())].iter().rev().find(|e| e.pass).map(|e| e.grad_lp0);
    let monotone = first_fail.is_none_or(|i| entries[i..].iter().all(|e| !e.pass));
    ScanReport { entries, largest_pass, smallest_fail, monotone }
}

pub fn validate_amplitudes(amplitudes: &[f64]) -> Result<()> {
    if amplitudes.len() < 3 {
        return Err(Error::InvalidArgument("a scan needs at least three amplitudes".into()));
    }
    if amplitudes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("amplitudes must be non-decreasing".into()));
    }
    Ok(())
}

/// Sequential amplitude scan.
pub fn amplitude_scan(template: &Experiment, amplitudes: &[f64]) -> Result<ScanReport> {
    validate_amplitudes(amplitudes)?;
    let entries = amplitudes.iter().map(|a| scan_entry(template, *a)).collect::<Result<Vec<_>>>()?;
    Ok(assemble_scan(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn synthetic(horizon: f64, step: f64, tracks: &[(&str, &dyn Fn(f64) -> f64)]) -> NormSeries {
        let mut s = NormSeries::default();
        let steps = libm::round(horizon / step) as usize;
        for i in 1..=steps {
            let t = i as f64 * step;
            let row: Vec<(String, f64)> = tracks.iter().map(|(n, f)| (n.to_string(), f(t))).collect();
            s.push(t, &row).unwrap();
        }
        s
    }

    fn summary(dim: usize, q: f64, norms: NormSeries, horizon: f64, step: f64) -> RunSummary {
        RunSummary { dim, p: model_exponent(dim, q).unwrap(), q, horizon, step, completed: true, norms }
    }

    #[test]
    fn exponent_chain_matches_frozen_values() {
        let c = exponent_chain(2, 2.5).unwrap();
        assert_eq!((c.p.as_str(), c.theta.as_str(), c.bound.as_str()), ("3/2", "1/3", "1/6"));
        assert_eq!(c.window, ["2".to_string(), "3".to_string()]);
        assert!(c.q_in_window);
        assert_eq!(c.d2_remark.as_deref(), Some("-1/6"));
        assert_eq!(c.d2_identity_holds, Some(false));

        let c = exponent_chain(1, 4.0).unwrap();
        assert_eq!((c.p.as_str(), c.bound.as_str()), ("3/2", "5/24"));
        assert_eq!(c.window, ["3".to_string(), "5".to_string()]);
        assert!(c.d2_remark.is_none());

        let c = exponent_chain(1, 3.5).unwrap();
        assert_eq!((c.p.as_str(), c.bound.as_str()), ("5/4", "7/40"));
        assert!((c.bound_value - 0.175).abs() < 1e-15 && c.q_in_window);

        assert!(!exponent_chain(2, 3.0).unwrap().q_in_window);
        assert!(matches!(exponent_chain(2, 1.0), Err(Error::InvalidExponent(_))));
        assert!(rational_from(core::f64::consts::PI).is_err());
    }

    #[test]
    fn d2_identity_holds_only_at_p_two() {
        // 1/2 − 1/(2p) = 1/2 − 1/p has no finite solution, so never equal for admissible q
        for q in [2.2, 2.5, 2.75, 2.9] {
            assert_eq!(exponent_chain(2, q).unwrap().d2_identity_holds, Some(false));
        }
    }

    #[test]
    fn fit_recovers_power_laws() {
        let s = synthetic(100.0, 0.1, &[("a", &|t| 3.0 * libm::pow(t, -0.375)), ("b", &|t| libm::pow(1.0 + t, 0.2))]);
        let w = FitWindow { t_min: 5.0, t_max: 100.0 };
        let a = fit_exponent(&s, "a", w, Abscissa::T).unwrap();
        assert!((a.slope + 0.375).abs() < 1e-12 && (a.intercept - libm::log(3.0)).abs() < 1e-10);
        let b = fit_exponent(&s, "b", w, Abscissa::OnePlusT).unwrap();
        assert!((b.slope - 0.2).abs() < 1e-12);
        let tiny = FitWindow { t_min: 5.0, t_max: 6.0 };
        assert!(matches!(fit_exponent(&s, "a", tiny, Abscissa::T), Err(Error::TooFewSamples { .. })));
        assert!(matches!(fit_exponent(&s, "zz", w, Abscissa::T), Err(Error::MissingTrack(_))));
    }

    #[test]
    fn gradient_bounds_accept_decay_and_reject_growth() {
        // d = 2, q = 2.5 ⇒ p = 3/2, α = 1/3
        let (h, t_end) = (0.01, 50.0);
        let good = synthetic(
            t_end,
            h,
            &[
                ("grad_Linf", &|t| 1.0 / (1.0 + libm::pow(t, 0.5))),
                ("grad_L1.5", &|t| 2.0 / (1.0 + 0.1 * t)),
            ],
        );
        let run = summary(2, 2.5, good, t_end, h);
        let r = check_gradient_bounds(&run, run.default_window()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.alpha - 1.0 / 3.0).abs() < 1e-15);

        let bad = synthetic(t_end, h, &[("grad_Linf", &|t| libm::pow(t, -0.2)), ("grad_L1.5", &|_| 1.0)]);
        let run = summary(2, 2.5, bad, t_end, h);
        let r = check_gradient_bounds(&run, run.default_window()).unwrap();
        assert!(!r.pass && !r.compensated.bounded && r.lp.bounded);

        let mut unfinished = run.clone();
        unfinished.completed = false;
        assert!(check_gradient_bounds(&unfinished, run.default_window()).is_err());
        let early = FitWindow { t_min: 0.05, t_max: 10.0 };
        assert!(check_gradient_bounds(&run, early).is_err());
    }

    #[test]
    fn interpolated_decay_uses_p_theta_track() {
        // p = 3/2, θ = 1/4 ⇒ p_θ = 2, rate = 2·(1/4)/(4·3/2) = 1/12
        let (h, t_end) = (0.01, 40.0);
        let s = synthetic(t_end, h, &[("grad_L2", &|t| libm::pow(t, -0.1))]);
        let run = summary(2, 2.5, s, t_end, h);
        let r = check_interpolated_decay(&run, 0.25, run.default_window()).unwrap();
        assert_eq!(r.p_theta, 2.0);
        assert!(r.pass && (r.fit.bound.unwrap() + 1.0 / 12.0).abs() < 1e-15);
        let s = synthetic(t_end, h, &[("grad_L2", &|t| libm::pow(t, 0.1))]);
        let run = summary(2, 2.5, s, t_end, h);
        assert!(!check_interpolated_decay(&run, 0.25, run.default_window()).unwrap().pass);
        assert!(check_interpolated_decay(&run, 1.0, run.default_window()).is_err());
    }

    #[test]
    fn growth_and_coarseness_bounds() {
        let (h, t_end) = (0.01, 100.0);
        let s = synthetic(
            t_end,
            h,
            &[
                ("u_L1.5", &|t| libm::pow(1.0 + t, 0.2)),
                ("u_Linf", &|t| libm::pow(1.0 + t, 0.1)),
                ("coarseness", &|t| libm::pow(1.0 + t, 0.15)),
            ],
        );
        let run = summary(2, 2.5, s, t_end, h);
        let w = FitWindow { t_min: 2.5, t_max: t_end };
        let g = check_growth(&run, w).unwrap();
        assert!(g.pass);
        assert!((g.linf.bound.unwrap() - (0.75 - 1.0 / 3.0)).abs() < 1e-15);
        assert!(check_growth(&run, FitWindow { t_min: 10.0, t_max: t_end }).is_err());
        let c = check_coarseness(&run, w).unwrap();
        assert!(c.pass, "slope 0.15 is under 1/6 + 0.05");
        assert_eq!(c.pass_d2_remark, Some(false));
        let mut outside = run.clone();
        outside.q = 3.5;
        assert!(matches!(check_coarseness(&outside, w), Err(Error::OutsideWindow { .. })));
    }

    #[test]
    fn initial_data_is_normalised_and_deterministic() {
        let grid = GridSpec::new(2, 64, 40.0).unwrap();
        for family in [Family::GaussianBump, Family::RandomBand, Family::Multibump] {
            let spec = InitialData { family, amplitude: 0.3, seed: 7, width: None };
            let u = make_initial_data(&spec, grid).unwrap();
            let g = spectral_gradient(&u).unwrap().magnitude().max_abs();
            assert!((g - 0.3).abs() < 1e-12, "{family:?}: {g}");
            assert!(u.mean().abs() < 1e-14 * u.max_abs().max(1.0), "{family:?}");
            assert_eq!(u, make_initial_data(&spec, grid).unwrap());
            let shell = (0..grid.len()).filter(|i| grid.in_boundary_shell(*i)).fold(0.0, |m: f64, i| m.max(u.samples()[i].abs()));
            assert!(shell < 1e-3 * u.max_abs(), "{family:?}: shell {shell}");
        }
        let a = make_initial_data(&InitialData { family: Family::RandomBand, amplitude: 1.0, seed: 1, width: None }, grid);
        let b = make_initial_data(&InitialData { family: Family::RandomBand, amplitude: 1.0, seed: 2, width: None }, grid);
        assert_ne!(a.unwrap(), b.unwrap());
        let bad = InitialData { family: Family::GaussianBump, amplitude: 0.0, seed: 1, width: None };
        assert!(make_initial_data(&bad, grid).is_err());
    }

    #[test]
    fn scan_assembly_brackets_transition() {
        let e = |a: f64, pass: bool| ScanEntry {
            amplitude: a,
            grad_lp0: 2.0 * a,
            termination: Termination::Completed,
            m: None,
            pass,
            guards_clean: true,
        };
        let r = assemble_scan(vec![e(3.0, false), e(1.0, true), e(2.0, true), e(4.0, false)]);
        assert_eq!((r.largest_pass, r.smallest_fail, r.monotone), (Some(4.0), Some(6.0), true));
        let r = assemble_scan(vec![e(1.0, true), e(2.0, false), e(3.0, true)]);
        assert!(!r.monotone);
        assert!(validate_amplitudes(&[1.0, 2.0]).is_err());
        assert!(validate_amplitudes(&[1.0, 3.0, 2.0]).is_err());
    }

    #[test]
    fn small_scan_runs_end_to_end() {
        let exp = Experiment {
            grid: GridSpec::new(1, 64, 40.0).unwrap(),
            model: CurrentModel::power_law(4.0),
            initial: InitialData { family: Family::GaussianBump, amplitude: 0.1, seed: 1, width: None },
            horizon: 2.0,
            solver: SolverConfig::new(crate::solver::Scheme::Etd2, 0.01),
            window: None,
        };
        let r = amplitude_scan(&exp, &[0.05, 0.1, 0.2]).unwrap();
        assert_eq!(r.entries.len(), 3);
        assert!(r.entries.iter().all(|e| e.termination == Termination::Completed));
    }
}
