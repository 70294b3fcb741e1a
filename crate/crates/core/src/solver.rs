//! Time stepping for `u_t + Δ²u + ∇·J(∇u) = 0` in mild (Duhamel) form.
//!
//! Both schemes advance spectra and treat `−Δ²` exactly. `picard_duhamel` solves
//! the Duhamel fixed point on each step by iteration, freezing `N = −∇·J(∇u)` per
//! subinterval at the average of its endpoint values and propagating it with the
//! exact `φ₁` weight. `etd2` is the two-stage exponential Runge–Kutta scheme.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::currents::CurrentModel;
use crate::error::{Error, Result};
use crate::field::{Field, Transform};
use crate::grid::GridSpec;
use crate::semigroup::{phi1, phi2};
use crate::spectral::lp_norm_samples;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Top-octave energy fraction above which a step is flagged as under-resolved.
pub const TAIL_WARNING: f64 = 1e-6;
/// Boundary-shell amplitude, relative to `‖u‖_∞`, above which a run is flagged.
pub const SHELL_WARNING: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    PicardDuhamel,
    Etd2,
}

fn default_nodes() -> usize {
    4
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_max_iterations() -> usize {
    50
}
fn default_true() -> bool {
    true
}
fn default_stride() -> usize {
    100
}
fn default_blowup_factor() -> f64 {
    1e3
}
fn default_step() -> f64 {
    1e-2
}
fn default_scheme() -> Scheme {
    Scheme::PicardDuhamel
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Time step `h`.
    #[serde(default = "default_step")]
    pub step: f64,
    /// Quadrature nodes per step `M` (Picard only).
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Absolute stopping tolerance on the `W^{1,p}∩W^{1,∞}` iterate difference.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_true")]
    pub dealias: bool,
    /// Keep a snapshot every `snapshot_stride` steps (0 keeps only the ends).
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Halt once `‖u‖_{W^{1,∞}}` exceeds this multiple of its initial value.
    #[serde(default = "default_blowup_factor")]
    pub blowup_factor: f64,
    /// Lebesgue exponents tracked in addition to `{1, p, 2, pq, ∞}`.
    #[serde(default)]
    pub extra_exponents: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::new(default_scheme(), default_step())
    }
}

impl SolverConfig {
    pub fn new(scheme: Scheme, step: f64) -> Self {
        SolverConfig {
            scheme,
            step,
            nodes: default_nodes(),
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            dealias: true,
            snapshot_stride: default_stride(),
            blowup_factor: default_blowup_factor(),
            extra_exponents: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("step must be positive, got {}", self.step)));
        }
        if self.nodes < 2 {
            return Err(Error::InvalidArgument("need at least two quadrature nodes".into()));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidArgument("tolerance and max_iterations must be positive".into()));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::InvalidArgument("blowup_factor must exceed 1".into()));
        }
        for p in &self.extra_exponents {
            if !(*p >= 1.0) {
                return Err(Error::InvalidExponent(*p));
            }
        }
        Ok(())
    }
}

/// Norm exponent `p = d(q−1)/2`; values below one are rejected.
pub fn model_exponent(dim: usize, q: f64) -> Result<f64> {
    let p = dim as f64 * (q - 1.0) / 2.0;
    if p >= 1.0 && p.is_finite() {
        Ok(p)
    } else {
        Err(Error::InvalidExponent(p))
    }
}

// ---------------------------------------------------------------- spectral workspace

/// Physical samples of `u` and its gradient.
#[derive(Debug, Clone)]
struct Phys {
    u: Vec<f64>,
    grad: Vec<Vec<f64>>,
}

enum Fault {
    NonFinite,
    Failed(Error),
}

impl From<Error> for Fault {
    fn from(e: Error) -> Self {
        Fault::Failed(e)
    }
}

struct Workspace {
    grid: GridSpec,
    tr: Transform,
    k4: Vec<f64>,
    /// Derivative wavenumber per axis per flat index.
    ik: Vec<Vec<f64>>,
    keep: Vec<bool>,
    dealias: bool,
}

impl Workspace {
    fn new(grid: GridSpec, dealias: bool) -> Self {
        let n = grid.n() as u64;
        let k4 = (0..grid.len())
            .map(|i| {
                let k2 = grid.wavevector_norm_sq(i);
                k2 * k2
            })
            .collect();
        let ik = (0..grid.dim())
            .map(|ax| (0..grid.len()).map(|i| grid.derivative_wavenumber(grid.axes(i)[ax])).collect())
            .collect();
        let keep = (0..grid.len()).map(|i| 3 * grid.max_mode(i) <= n).collect();
        Workspace { grid, tr: Transform::new(grid), k4, ik, keep, dealias }
    }

    fn weights(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.k4.iter().map(|&k4| f(k4)).collect()
    }

    fn forward(&self, samples: &[f64]) -> Vec<Complex64> {
        self.tr.forward_samples(samples).coeffs().to_vec()
    }

    fn phys(&self, spec: &[Complex64]) -> core::result::Result<Phys, Fault> {
        let u = self.tr.inverse_samples(spec);
        let mut grad = Vec::with_capacity(self.grid.dim());
        for k in &self.ik {
            let d: Vec<Complex64> = spec.iter().zip(k).map(|(c, k)| Complex64::new(-c.im * k, c.re * k)).collect();
            grad.push(self.tr.inverse_samples(&d));
        }
        if u.iter().chain(grad.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Fault::NonFinite);
        }
        Ok(Phys { u, grad })
    }

    /// Spectrum of `N(u) = −∇·J(∇u)`, zero mean mode, optionally dealiased.
    fn nonlinear(&self, phys: &Phys, model: &CurrentModel) -> core::result::Result<Vec<Complex64>, Fault> {
        let d = self.grid.dim();
        let n = self.grid.len();
        if model.is_zero() {
            return Ok(alloc::vec![ZERO; n]);
        }
        let mut j: Vec<Vec<f64>> = (0..d).map(|_| Vec::with_capacity(n)).collect();
        for i in 0..n {
            let v = [phys.grad[0][i], if d == 2 { phys.grad[1][i] } else { 0.0 }];
            let out = model
                .eval_point(v, d)
                .map_err(|value| Fault::Failed(Error::DenominatorUnderflow { index: i, value }))?;
            for ax in 0..d {
                if !out[ax].is_finite() {
                    return Err(Fault::NonFinite);
                }
                j[ax].push(out[ax]);
            }
        }
        let mut acc = alloc::vec![ZERO; n];
        for (ax, comp) in j.iter().enumerate() {
            let s = self.forward(comp);
            for ((a, c), k) in acc.iter_mut().zip(&s).zip(&self.ik[ax]) {
                // −(i k) ĉ
                *a += Complex64::new(c.im * k, -c.re * k);
            }
        }
        acc[0] = ZERO;
        if self.dealias {
            for (a, keep) in acc.iter_mut().zip(&self.keep) {
                if !keep {
                    *a = ZERO;
                }
            }
        }
        Ok(acc)
    }

    /// `‖u‖_p + ‖∇u‖_p + ‖u‖_∞ + ‖∇u‖_∞` of `a − b` (or of `a` alone).
    fn wnorm(&self, a: &Phys, b: Option<&Phys>, p: f64) -> f64 {
        let n = self.grid.len();
        let du: Vec<f64> = match b {
            Some(b) => a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect(),
            None => a.u.clone(),
        };
        let mag: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 0.0;
                for ax in 0..a.grad.len() {
                    let g = a.grad[ax][i] - b.map_or(0.0, |b| b.grad[ax][i]);
                    s += g * g;
                }
                libm::sqrt(s)
            })
            .collect();
        let lp = |v: &[f64], p: f64| lp_norm_samples(&self.grid, v, p).unwrap_or(f64::NAN);
        lp(&du, p) + lp(&mag, p) + lp(&du, f64::INFINITY) + lp(&mag, f64::INFINITY)
    }
}

// ---------------------------------------------------------------- Picard / Duhamel

/// Multipliers for one Picard step of length `h` on `M` uniform subintervals.
struct PicardPlan {
    /// `exp(−s_j |k|⁴)` for `s_j = j h/M`, `j = 0..=M`, with `s_M = h` exactly.
    decay: Vec<Vec<f64>>,
    /// `Δ φ₁(−Δ|k|⁴)` with `Δ = h/M`.
    weight: Vec<f64>,
}

impl PicardPlan {
    fn new(ws: &Workspace, h: f64, nodes: usize) -> Self {
        let delta = h / nodes as f64;
        let decay = (0..=nodes)
            .map(|j| {
                let s = if j == nodes { h } else { j as f64 * delta };
                ws.weights(|k4| libm::exp(-s * k4))
            })
            .collect();
        let weight = ws.weights(|k4| delta * phi1(-delta * k4));
        PicardPlan { decay, weight }
    }

    fn nodes(&self) -> usize {
        self.decay.len() - 1
    }

    /// Node spectra `û_j = E_j û₀ + Σ_{i<j} E_{j−i−1} W (N_i + N_{i+1})/2`.
    fn path(&self, u0: &[Complex64], forcing: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let m = self.nodes();
        let blocks: Vec<Vec<Complex64>> = (0..m)
            .map(|i| {
                forcing[i]
                    .iter()
                    .zip(&forcing[i + 1])
                    .zip(&self.weight)
                    .map(|((a, b), w)| (a + b) * (0.5 * w))
                    .collect()
            })
            .collect();
        (0..=m)
            .map(|j| {
                let mut s: Vec<Complex64> = u0.iter().zip(&self.decay[j]).map(|(c, e)| c * e).collect();
                for (i, block) in blocks.iter().enumerate().take(j) {
                    for ((o, b), e) in s.iter_mut().zip(block).zip(&self.decay[j - i - 1]) {
                        *o += b * e;
                    }
                }
                s
            })
            .collect()
    }
}

struct PathRun {
    spectrum: Vec<Complex64>,
    phys: Phys,
    /// `sup_j ‖u^n(s_j) − u^{n−1}(s_j)‖` for `n = 1, 2, …`.
    differences: Vec<f64>,
    /// `sup_j ‖u^n(s_j)‖` for `n = 0, 1, …`.
    iterate_norms: Vec<f64>,
    converged: bool,
}

enum PathFault {
    NonFinite { iterate: usize },
    Failed(Error),
}

/// Runs the Duhamel iteration from the free path. Stops once the difference drops
/// below `tol` (if given) or after `max_iter` iterations.
#[allow(clippy::too_many_arguments)]
fn iterate_path(
    ws: &Workspace,
    plan: &PicardPlan,
    u0: &[Complex64],
    phys0: &Phys,
    model: &CurrentModel,
    p: f64,
    max_iter: usize,
    tol: Option<f64>,
) -> core::result::Result<PathRun, PathFault> {
    let m = plan.nodes();
    let lift = |iterate: usize| {
        move |f: Fault| match f {
            Fault::NonFinite => PathFault::NonFinite { iterate },
            Fault::Failed(e) => PathFault::Failed(e),
        }
    };
    let n0 = ws.nonlinear(phys0, model).map_err(lift(0))?;
    let build = |spectra: &[Vec<Complex64>], iterate: usize| -> core::result::Result<Vec<Phys>, PathFault> {
        let mut out = Vec::with_capacity(m + 1);
        out.push(phys0.clone());
        for s in &spectra[1..] {
            out.push(ws.phys(s).map_err(lift(iterate))?);
        }
        Ok(out)
    };
    let sup_norm = |phys: &[Phys]| phys.iter().map(|ph| ws.wnorm(ph, None, p)).fold(0.0, f64::max);

    let zero_forcing = alloc::vec![alloc::vec![ZERO; u0.len()]; m + 1];
    let mut spectra = plan.path(u0, &zero_forcing);
    let mut phys = build(&spectra, 0)?;
    let mut differences = Vec::new();
    let mut iterate_norms = alloc::vec![sup_norm(&phys)];
    let mut converged = false;
    for n in 1..=max_iter {
        let mut forcing = Vec::with_capacity(m + 1);
        forcing.push(n0.clone());
        for ph in &phys[1..] {
            forcing.push(ws.nonlinear(ph, model).map_err(lift(n))?);
        }
        let next_spectra = plan.path(u0, &forcing);
        let next = build(&next_spectra, n)?;
        let diff = next.iter().zip(&phys).map(|(a, b)| ws.wnorm(a, Some(b), p)).fold(0.0, f64::max);
        if !diff.is_finite() {
            return Err(PathFault::NonFinite { iterate: n });
        }
        differences.push(diff);
        iterate_norms.push(sup_norm(&next));
        spectra = next_spectra;
        phys = next;
        if tol.is_some_and(|t| diff < t) {
            converged = true;
            break;
        }
    }
    let spectrum = spectra.pop().expect("M >= 2");
    let phys_end = phys.pop().expect("M >= 2");
    Ok(PathRun { spectrum, phys: phys_end, differences, iterate_norms, converged })
}

/// Iteration diagnostics of one Picard step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardStats {
    pub iterations: usize,
    pub differences: Vec<f64>,
}

impl PicardStats {
    /// Successive ratios `d_{n+1}/d_n` of the iterate differences.
    pub fn ratios(&self) -> Vec<f64> {
        self.differences.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect()
    }

    pub fn last_ratio(&self) -> f64 {
        self.ratios().last().copied().unwrap_or(0.0)
    }
}

struct Stepper<'a> {
    ws: Workspace,
    model: &'a CurrentModel,
    cfg: &'a SolverConfig,
    p: f64,
    plans: Vec<(f64, PicardPlan)>,
    etd: Vec<(f64, [Vec<f64>; 3])>,
}

struct StepOut {
    spectrum: Vec<Complex64>,
    phys: Phys,
    stats: Option<PicardStats>,
}

impl<'a> Stepper<'a> {
    fn new(grid: GridSpec, model: &'a CurrentModel, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        let p = model_exponent(grid.dim(), model.q())?;
        Ok(Stepper { ws: Workspace::new(grid, cfg.dealias), model, cfg, p, plans: Vec::new(), etd: Vec::new() })
    }

    fn picard_plan(&mut self, h: f64) -> usize {
        if let Some(i) = self.plans.iter().position(|(hh, _)| *hh == h) {
            return i;
        }
        self.plans.push((h, PicardPlan::new(&self.ws, h, self.cfg.nodes)));
        self.plans.len() - 1
    }

    fn etd_plan(&mut self, h: f64) -> usize {
        if let Some(i) = self.etd.iter().position(|(hh, _)| *hh == h) {
            return i;
        }
        let e = self.ws.weights(|k4| libm::exp(-h * k4));
        let w1 = self.ws.weights(|k4| h * phi1(-h * k4));
        let w2 = self.ws.weights(|k4| h * phi2(-h * k4));
        self.etd.push((h, [e, w1, w2]));
        self.etd.len() - 1
    }

    fn step(&mut self, u: &[Complex64], phys: &Phys, h: f64, time: f64) -> Result<StepOut> {
        match self.cfg.scheme {
            Scheme::PicardDuhamel => {
                let i = self.picard_plan(h);
                let run = iterate_path(
                    &self.ws,
                    &self.plans[i].1,
                    u,
                    phys,
                    self.model,
                    self.p,
                    self.cfg.max_iterations,
                    Some(self.cfg.tolerance),
                )
                .map_err(|f| match f {
                    PathFault::NonFinite { .. } => Error::BlowUp { time },
                    PathFault::Failed(e) => e,
                })?;
                let stats = PicardStats { iterations: run.differences.len(), differences: run.differences };
                if !run.converged {
                    return Err(Error::StepTooLarge {
                        time,
                        iterations: stats.iterations,
                        last_ratio: stats.last_ratio(),
                    });
                }
                Ok(StepOut { spectrum: run.spectrum, phys: run.phys, stats: Some(stats) })
            }
            Scheme::Etd2 => {
                let i = self.etd_plan(h);
                let blow = |f: Fault| match f {
                    Fault::NonFinite => Error::BlowUp { time },
                    Fault::Failed(e) => e,
                };
                let [e, w1, w2] = &self.etd[i].1;
                let nu = self.ws.nonlinear(phys, self.model).map_err(blow)?;
                let a: Vec<Complex64> =
                    (0..u.len()).map(|k| u[k] * e[k] + nu[k] * w1[k]).collect();
                let pa = self.ws.phys(&a).map_err(blow)?;
                let na = self.ws.nonlinear(&pa, self.model).map_err(blow)?;
                let next: Vec<Complex64> = (0..u.len()).map(|k| a[k] + (na[k] - nu[k]) * w2[k]).collect();
                let pn = self.ws.phys(&next).map_err(blow)?;
                Ok(StepOut { spectrum: next, phys: pn, stats: None })
            }
        }
    }
}

fn single_step(u: &Field, h: f64, model: &CurrentModel, cfg: &SolverConfig, scheme: Scheme) -> Result<(Field, Option<PicardStats>)> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("step must be positive, got {h}")));
    }
    let cfg = SolverConfig { scheme, ..cfg.clone() };
    let mut st = Stepper::new(*u.grid(), model, &cfg)?;
    let spec = st.ws.forward(u.samples());
    let phys = st.ws.phys(&spec).map_err(|_| Error::BlowUp { time: 0.0 })?;
    let out = st.step(&spec, &phys, h, 0.0)?;
    Ok((Field::new(*u.grid(), out.phys.u)?, out.stats))
}

/// One Duhamel step of length `h` solved by Picard iteration.
pub fn picard_step(u: &Field, h: f64, model: &CurrentModel, cfg: &SolverConfig) -> Result<Field> {
    picard_step_with_stats(u, h, model, cfg).map(|(f, _)| f)
}

pub fn picard_step_with_stats(u: &Field, h: f64, model: &CurrentModel, cfg: &SolverConfig) -> Result<(Field, PicardStats)> {
    let (f, stats) = single_step(u, h, model, cfg, Scheme::PicardDuhamel)?;
    Ok((f, stats.expect("picard scheme records statistics")))
}

/// One ETDRK2 step of length `h`.
pub fn etd2_step(u: &Field, h: f64, model: &CurrentModel, cfg: &SolverConfig) -> Result<Field> {
    single_step(u, h, model, cfg, Scheme::Etd2).map(|(f, _)| f)
}

// ---------------------------------------------------------------- norm series and trajectories

/// Column name for an exponent: `"inf"` or the shortest decimal form.
pub fn exponent_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        alloc::format!("{p}")
    }
}

/// `‖u‖_{L^p}` column.
pub fn track_u(p: f64) -> String {
    alloc::format!("u_L{}", exponent_label(p))
}

/// `‖∇u‖_{L^p}` column.
pub fn track_grad(p: f64) -> String {
    alloc::format!("grad_L{}", exponent_label(p))
}

pub const TRACK_MEAN: &str = "mean";
/// `‖u − mean‖_{L²}`.
pub const TRACK_COARSENESS: &str = "coarseness";
/// `‖u − mean‖_{L²} / |box|^{1/2}`.
pub const TRACK_COARSENESS_RMS: &str = "coarseness_rms";
/// Boundary-shell maximum over `‖u‖_∞`.
pub const TRACK_SHELL: &str = "shell_ratio";
/// Spectral top-octave energy fraction.
pub const TRACK_TAIL: &str = "tail";

/// Named norm tracks sampled at common times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormSeries {
    pub t: Vec<f64>,
    pub columns: BTreeMap<String, Vec<f64>>,
}

impl NormSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn track(&self, name: &str) -> Result<&[f64]> {
        self.columns.get(name).map(|v| v.as_slice()).ok_or_else(|| Error::MissingTrack(name.into()))
    }

    /// Appends one row; the first row fixes the column set.
    pub fn push(&mut self, t: f64, row: &[(String, f64)]) -> Result<()> {
        if !self.t.is_empty() && row.len() != self.columns.len() {
            return Err(Error::InvalidArgument("row does not match the column set".into()));
        }
        if self.t.last().is_some_and(|last| !(t > *last)) {
            return Err(Error::InvalidArgument(alloc::format!("time {t} is not increasing")));
        }
        for (name, v) in row {
            if self.t.is_empty() {
                self.columns.insert(name.clone(), Vec::new());
            }
            self.columns
                .get_mut(name)
                .ok_or_else(|| Error::MissingTrack(name.clone()))?
                .push(*v);
        }
        self.t.push(t);
        Ok(())
    }
}

/// Sorted, deduplicated exponents `{1, p, 2, pq, ∞} ∪ extra`.
pub fn tracked_exponents(p: f64, q: f64, extra: &[f64]) -> Vec<f64> {
    let mut e: Vec<f64> = alloc::vec![1.0, p, 2.0, p * q, f64::INFINITY];
    e.extend_from_slice(extra);
    e.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    e.dedup();
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// A non-finite value appeared during the step starting at `time`.
    BlowUp { time: f64 },
    /// `‖u‖_{W^{1,∞}}` exceeded the ceiling.
    CeilingExceeded { time: f64, value: f64, ceiling: f64 },
    StepTooLarge { time: f64, iterations: usize, last_ratio: f64 },
    Failed { time: f64, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub model: CurrentModel,
    pub config: SolverConfig,
    pub p: f64,
    pub q: f64,
    pub horizon: f64,
    /// Every recorded time; `times[0] = 0`.
    pub times: Vec<f64>,
    pub norms: NormSeries,
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    /// `max_t |mean(t) − mean(0)|`.
    pub mean_drift: f64,
    pub max_shell_ratio: f64,
    pub max_tail: f64,
    pub max_picard_iterations: usize,
    pub max_contraction_ratio: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

struct Recorder {
    grid: GridSpec,
    exps: Vec<f64>,
}

impl Recorder {
    fn row(&self, phys: &Phys, spec: &[Complex64]) -> Result<Vec<(String, f64)>> {
        let g = &self.grid;
        let n = g.len();
        let mag: Vec<f64> = (0..n)
            .map(|i| libm::sqrt(phys.grad.iter().map(|c| c[i] * c[i]).sum::<f64>()))
            .collect();
        let mut row = Vec::with_capacity(2 * self.exps.len() + 5);
        for &p in &self.exps {
            row.push((track_u(p), lp_norm_samples(g, &phys.u, p)?));
            row.push((track_grad(p), lp_norm_samples(g, &mag, p)?));
        }
        let mean = phys.u.iter().sum::<f64>() / n as f64;
        let dev: Vec<f64> = phys.u.iter().map(|x| x - mean).collect();
        let c = lp_norm_samples(g, &dev, 2.0)?;
        row.push((TRACK_MEAN.into(), mean));
        row.push((TRACK_COARSENESS.into(), c));
        row.push((TRACK_COARSENESS_RMS.into(), c / libm::sqrt(g.volume())));
        let umax = phys.u.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
        let shell = (0..n).filter(|i| g.in_boundary_shell(*i)).fold(0.0, |m: f64, i| m.max(phys.u[i].abs()));
        row.push((TRACK_SHELL.into(), if umax > 0.0 { shell / umax } else { 0.0 }));
        let (mut tail, mut total) = (0.0, 0.0);
        let nn = g.n() as u64;
        for (i, c) in spec.iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            if 4 * g.max_mode(i) > nn {
                tail += e;
            }
        }
        row.push((TRACK_TAIL.into(), if total > 0.0 { tail / total } else { 0.0 }));
        Ok(row)
    }
}

fn value_of(row: &[(String, f64)], name: &str) -> f64 {
    row.iter().find(|(n, _)| n == name).map_or(f64::NAN, |(_, v)| *v)
}

/// Integrates from `u0` to `horizon`, recording norms at every step. Runtime failures
/// end the trajectory with a [`Termination`] instead of an error.
pub fn solve(u0: &Field, horizon: f64, model: &CurrentModel, cfg: &SolverConfig) -> Result<Trajectory> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("horizon must be positive, got {horizon}")));
    }
    let grid = *u0.grid();
    let mut st = Stepper::new(grid, model, cfg)?;
    let rec = Recorder { grid, exps: tracked_exponents(st.p, model.q(), &cfg.extra_exponents) };
    let h = cfg.step;

    let mut spec = st.ws.forward(u0.samples());
    let mut phys = st.ws.phys(&spec).map_err(|_| Error::NonFinite { index: 0 })?;
    let mut norms = NormSeries::default();
    let first = rec.row(&phys, &spec)?;
    let w1inf = |row: &[(String, f64)]| value_of(row, &track_u(f64::INFINITY)) + value_of(row, &track_grad(f64::INFINITY));
    let ceiling = cfg.blowup_factor * w1inf(&first);
    let mean0 = value_of(&first, TRACK_MEAN);
    let (mut mean_drift, mut max_shell, mut max_tail) = (0.0f64, value_of(&first, TRACK_SHELL), value_of(&first, TRACK_TAIL));
    norms.push(0.0, &first)?;
    let mut snapshots = alloc::vec![Snapshot { t: 0.0, field: u0.clone() }];
    let mut termination = Termination::Completed;
    let (mut max_iters, mut max_ratio) = (0usize, 0.0f64);

    let steps = libm::ceil(horizon / h - 1e-9).max(1.0) as usize;
    let mut t = 0.0;
    for k in 1..=steps {
        let t_next = if k == steps { horizon } else { k as f64 * h };
        let out = match st.step(&spec, &phys, t_next - t, t) {
            Ok(o) => o,
            Err(e) => {
                termination = match e {
                    Error::BlowUp { time } => Termination::BlowUp { time },
                    Error::StepTooLarge { time, iterations, last_ratio } => {
                        Termination::StepTooLarge { time, iterations, last_ratio }
                    }
                    other => Termination::Failed { time: t, message: alloc::format!("{other}") },
                };
                break;
            }
        };
        if let Some(s) = &out.stats {
            max_iters = max_iters.max(s.iterations);
            max_ratio = s.ratios().into_iter().fold(max_ratio, f64::max);
        }
        spec = out.spectrum;
        phys = out.phys;
        t = t_next;
        let row = rec.row(&phys, &spec)?;
        mean_drift = mean_drift.max((value_of(&row, TRACK_MEAN) - mean0).abs());
        max_shell = max_shell.max(value_of(&row, TRACK_SHELL));
        max_tail = max_tail.max(value_of(&row, TRACK_TAIL));
        let size = w1inf(&row);
        norms.push(t, &row)?;
        if (cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0) || k == steps {
            snapshots.push(Snapshot { t, field: Field::new(grid, phys.u.clone())? });
        }
        if size > ceiling {
            termination = Termination::CeilingExceeded { time: t, value: size, ceiling };
            break;
        }
    }
    if termination != Termination::Completed && snapshots.last().is_some_and(|s| s.t < t) {
        snapshots.push(Snapshot { t, field: Field::new(grid, phys.u.clone())? });
    }
    let mut warnings = Vec::new();
    if max_shell > SHELL_WARNING {
        warnings.push(alloc::format!("boundary shell reached {max_shell:e} of the maximum (guard {SHELL_WARNING:e})"));
    }
    if max_tail > TAIL_WARNING {
        warnings.push(alloc::format!("spectral tail reached {max_tail:e} (guard {TAIL_WARNING:e})"));
    }
    Ok(Trajectory {
        grid,
        model: model.clone(),
        config: cfg.clone(),
        p: st.p,
        q: model.q(),
        horizon,
        times: norms.t.clone(),
        norms,
        snapshots,
        termination,
        mean_drift,
        max_shell_ratio: max_shell,
        max_tail,
        max_picard_iterations: max_iters,
        max_contraction_ratio: max_ratio,
        warnings,
    })
}

// ---------------------------------------------------------------- iteration study

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStudy {
    pub delta: f64,
    pub nodes: usize,
    /// `sup_j ‖u^n − u^{n−1}‖_{W^{1,p}∩W^{1,∞}}` for `n = 1..=n_max`.
    pub differences: Vec<f64>,
    /// `sup_j ‖u^n‖` for `n = 0..=n_max`.
    pub iterate_norms: Vec<f64>,
    pub initial_norm: f64,
    /// `max_n sup_j ‖u^n‖ / ‖u₀‖`.
    pub doubling_margin: f64,
    /// `sup_j ‖u⁰‖ / ‖u₀‖` for the free evolution.
    pub free_margin: f64,
}

impl IterationStudy {
    pub fn ratios(&self) -> Vec<f64> {
        self.differences.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect()
    }
}

/// The sequence `u⁰ = S(t)u₀`, `u^n = S(t)u₀ + ∫ S(t−s) N(u^{n−1}(s)) ds` on `[0, δ]`,
/// discretised with the Picard step's product rule on `cfg.nodes` subintervals.
pub fn iteration_study(u0: &Field, delta: f64, n_max: usize, model: &CurrentModel, cfg: &SolverConfig) -> Result<IterationStudy> {
    if n_max < 3 {
        return Err(Error::InvalidArgument("iteration study needs n_max >= 3".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("interval must be positive, got {delta}")));
    }
    let st = Stepper::new(*u0.grid(), model, cfg)?;
    let plan = PicardPlan::new(&st.ws, delta, cfg.nodes);
    let spec = st.ws.forward(u0.samples());
    let phys = st.ws.phys(&spec).map_err(|_| Error::NonFiniteIterate { index: 0 })?;
    let initial_norm = st.ws.wnorm(&phys, None, st.p);
    let run = iterate_path(&st.ws, &plan, &spec, &phys, model, st.p, n_max, None).map_err(|f| match f {
        PathFault::NonFinite { iterate } => Error::NonFiniteIterate { index: iterate },
        PathFault::Failed(e) => e,
    })?;
    let scale = if initial_norm > 0.0 { 1.0 / initial_norm } else { 0.0 };
    Ok(IterationStudy {
        delta,
        nodes: cfg.nodes,
        doubling_margin: run.iterate_norms.iter().fold(0.0, |m: f64, x| m.max(x * scale)),
        free_margin: run.iterate_norms[0] * scale,
        differences: run.differences,
        iterate_norms: run.iterate_norms,
        initial_norm,
    })
}

// ---------------------------------------------------------------- data continuity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub horizon: f64,
    /// `(ε, sup_t ‖u − v‖ / ε)` per perturbation size.
    pub constants: Vec<[f64; 2]>,
    /// Largest relative change of `K` between consecutive `ε`.
    pub max_relative_change: f64,
}

/// Runs `u₀` and `u₀ + ε·w/‖w‖` to `horizon` for each `ε` and measures
/// `K(ε) = sup_t ‖u(t) − v(t)‖_{W^{1,p}∩W^{1,∞}} / ε` over the recorded steps.
pub fn data_continuity(
    u0: &Field,
    direction: &Field,
    epsilons: &[f64],
    horizon: f64,
    model: &CurrentModel,
    cfg: &SolverConfig,
) -> Result<ContinuityReport> {
    if epsilons.is_empty() {
        return Err(Error::InvalidArgument("need at least one perturbation size".into()));
    }
    let grid = *u0.grid();
    if *direction.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let run = |init: &Field| -> Result<Vec<Phys>> {
        let mut st = Stepper::new(grid, model, cfg)?;
        let mut spec = st.ws.forward(init.samples());
        let mut phys = st.ws.phys(&spec).map_err(|_| Error::NonFinite { index: 0 })?;
        let steps = libm::ceil(horizon / cfg.step - 1e-9).max(1.0) as usize;
        let mut out = alloc::vec![phys.clone()];
        let mut t = 0.0;
        for k in 1..=steps {
            let t_next = if k == steps { horizon } else { k as f64 * cfg.step };
            let o = st.step(&spec, &phys, t_next - t, t)?;
            spec = o.spectrum;
            phys = o.phys;
            out.push(phys.clone());
            t = t_next;
        }
        Ok(out)
    };
    let ws = Workspace::new(grid, cfg.dealias);
    let p = model_exponent(grid.dim(), model.q())?;
    let dir_spec = ws.forward(direction.samples());
    let dir_phys = ws.phys(&dir_spec).map_err(|_| Error::NonFinite { index: 0 })?;
    let dir_norm = ws.wnorm(&dir_phys, None, p);
    if !(dir_norm > 0.0) {
        return Err(Error::InvalidArgument("perturbation direction is zero".into()));
    }
    let base = run(u0)?;
    let mut constants = Vec::new();
    for &eps in epsilons {
        let perturbed = u0.add(&direction.scale(eps / dir_norm)?)?;
        let other = run(&perturbed)?;
        let sup = base.iter().zip(&other).map(|(a, b)| ws.wnorm(a, Some(b), p)).fold(0.0, f64::max);
        constants.push([eps, sup / eps]);
    }
    let max_relative_change = constants.windows(2).map(|w| (w[1][1] - w[0][1]).abs() / w[0][1]).fold(0.0, f64::max);
    Ok(ContinuityReport { horizon, constants, max_relative_change })
}
