//! Instance checks for the integral inequalities behind the well-posedness and
//! decay estimates: a singular Beta integral, Bihari's inequality with an
//! integrable weight, the bootstrap lemma `M ≤ c₁ + c₂M^γ`, Young's convolution
//! inequality and a Gagliardo–Nirenberg ratio.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Spectrum};
use crate::quadrature::integrate;
use crate::spectral::{lp_norm, wavenumber_power};

const QUAD_TOL: f64 = 1e-13;

// ---------------------------------------------------------------- Beta

/// `∫₀ᵗ (t−s)^{−a} s^{−b} ds`, split at `t/2` with `s = τ^{1/(1−b)}` on the left half
/// and the mirrored substitution on the right, which removes both endpoint singularities.
pub fn singular_integral(a: f64, b: f64, t: f64) -> Result<f64> {
    if !(a < 1.0) || !(b < 1.0) {
        return Err(Error::Divergent(alloc::format!("need a < 1 and b < 1, got a = {a}, b = {b}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("t must be positive, got {t}")));
    }
    // ∫₀^{t/2} (t − s)^{−e_far} s^{−e_near} ds
    let half = |e_near: f64, e_far: f64| {
        let r = 1.0 / (1.0 - e_near);
        let upper = libm::pow(0.5 * t, 1.0 - e_near);
        integrate(|tau| r * libm::pow(t - libm::pow(tau, r), -e_far), 0.0, upper, 0.0, QUAD_TOL)
    };
    Ok(half(b, a)? + half(a, b)?)
}

/// `C_{a,b} = ∫₀¹ (1−u)^{−a} u^{−b} du = B(1−a, 1−b)`.
pub fn beta_integral_constant(a: f64, b: f64) -> Result<f64> {
    singular_integral(a, b, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    pub a: f64,
    pub b: f64,
    pub constant: f64,
    /// `(t, ∫₀ᵗ…, C·t^{1−a−b})` at `t ∈ {0.5, 1, 2}`.
    pub scaling: Vec<[f64; 3]>,
    /// Largest relative deviation from the `t^{1−a−b}` collapse.
    pub max_collapse_error: f64,
}

pub fn beta_report(a: f64, b: f64) -> Result<BetaReport> {
    let constant = beta_integral_constant(a, b)?;
    let mut scaling = Vec::new();
    let mut max_collapse_error = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        let direct = singular_integral(a, b, t)?;
        let predicted = constant * libm::pow(t, 1.0 - a - b);
        max_collapse_error = max_collapse_error.max((direct - predicted).abs() / predicted);
        scaling.push([t, direct, predicted]);
    }
    Ok(BetaReport { a, b, constant, scaling, max_collapse_error })
}

// ---------------------------------------------------------------- Bihari

/// Piecewise-linear function through `(nodes[i], values[i])`; nodes strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl Table {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::InvalidArgument("table needs at least two matching nodes and values".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("table nodes must be finite and strictly increasing".into()));
        }
        Ok(Table { nodes, values })
    }

    pub fn constant(a: f64, b: f64, value: f64) -> Result<Self> {
        Table::new(alloc::vec![a, b], alloc::vec![value, value])
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Linear interpolation; constant extrapolation outside the nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return self.values[0];
        }
        if x >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        let i = self.nodes.partition_point(|&v| v <= x) - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let w = (x - x0) / (x1 - x0);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Exact `∫_{start}^{t}` of the interpolant (trapezoids), `t` clamped into the table.
    pub fn integral_to(&self, t: f64) -> f64 {
        let t = t.clamp(self.start(), self.end());
        let mut acc = 0.0;
        for w in 0..self.nodes.len() - 1 {
            let (x0, x1) = (self.nodes[w], self.nodes[w + 1]);
            if x0 >= t {
                break;
            }
            let hi = x1.min(t);
            acc += 0.5 * (self.values[w] + self.eval(hi)) * (hi - x0);
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Omega {
    Identity,
    Power { gamma: f64 },
    Table(Table),
}

impl Omega {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Omega::Identity => u,
            Omega::Power { gamma } => libm::pow(u, *gamma),
            Omega::Table(t) => t.eval(u),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Omega::Identity => Ok(()),
            Omega::Power { gamma } if gamma.is_finite() && *gamma > 0.0 => Ok(()),
            Omega::Power { gamma } => Err(Error::InvalidArgument(alloc::format!("omega exponent {gamma} must be positive"))),
            Omega::Table(t) => {
                if t.values.iter().any(|v| *v < 0.0) || t.values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidArgument("omega table must be non-negative and non-decreasing".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BihariProblem {
    pub k: f64,
    pub m: f64,
    /// Integrable weight on `[a, b]`, the table's node range.
    pub h: Table,
    pub omega: Omega,
    /// Anchor of `Ω(u) = ∫_{u₀}^{u} dy/ω(y)`.
    pub u0: f64,
}

/// Searches for `Ω⁻¹` stop at `BIHARI_CAP_FACTOR · max(k, u₀, 1)`.
pub const BIHARI_CAP_FACTOR: f64 = 1e12;
const BISECTION_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BihariOutcome {
    Bound { value: f64 },
    /// `Ω(k) + M∫h` exceeds `Ω` over the searched range.
    OutOfDomain { target: f64, reachable: f64 },
}

impl BihariOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            BihariOutcome::Bound { value } => Some(*value),
            BihariOutcome::OutOfDomain { .. } => None,
        }
    }
}

impl BihariProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0) || !(self.m >= 0.0) || !self.k.is_finite() || !self.m.is_finite() {
            return Err(Error::InvalidArgument("k and M must be finite and non-negative".into()));
        }
        if !(self.u0 > 0.0) || !self.u0.is_finite() {
            return Err(Error::InvalidArgument("anchor u0 must be positive".into()));
        }
        self.omega.validate()
    }

    fn cap(&self) -> f64 {
        BIHARI_CAP_FACTOR * self.k.max(self.u0).max(1.0)
    }

    /// `∫_{lo}^{hi} dy/ω(y)`; log substitution when `lo > 0`.
    fn omega_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        if lo == hi {
            return Ok(0.0);
        }
        let check = |y: f64, w: f64| {
            if w > 0.0 {
                Ok(())
            } else {
                Err(Error::Divergent(alloc::format!("omega({y}) = {w} on the integration range")))
            }
        };
        let (a, b) = (lo.min(hi), lo.max(hi));
        check(a, self.omega.eval(a))?;
        let val = if a > 0.0 {
            let mut err = None;
            let v = integrate(
                |s| {
                    let y = libm::exp(s);
                    let w = self.omega.eval(y);
                    if !(w > 0.0) {
                        err = Some(y);
                    }
                    y / w
                },
                libm::log(a),
                libm::log(b),
                0.0,
                QUAD_TOL,
            );
            if let Some(y) = err {
                return Err(Error::Divergent(alloc::format!("omega vanishes at {y}")));
            }
            v?
        } else {
            integrate(|y| 1.0 / self.omega.eval(y), a, b, 0.0, QUAD_TOL)?
        };
        Ok(if hi >= lo { val } else { -val })
    }

    /// `Ω(u) = ∫_{u₀}^{u} dy/ω(y)`.
    pub fn big_omega(&self, u: f64) -> Result<f64> {
        self.omega_integral(self.u0, u)
    }

    /// `Ω⁻¹(Ω(k) + M∫ₐᵗh)`, computed as the root `v` of `∫_k^v dy/ω = M∫ₐᵗh`.
    pub fn bound(&self, t: f64) -> Result<BihariOutcome> {
        self.validate()?;
        if t < self.h.start() || t > self.h.end() {
            return Err(Error::InvalidArgument(alloc::format!("t = {t} outside [{}, {}]", self.h.start(), self.h.end())));
        }
        // Ω(k) must exist even when no growth is requested
        self.big_omega(self.k)?;
        let target = self.m * self.h.integral_to(t);
        if target == 0.0 {
            return Ok(BihariOutcome::Bound { value: self.k });
        }
        if target < 0.0 {
            return Err(Error::InvalidArgument("M∫h must be non-negative".into()));
        }
        let cap = self.cap();
        let reachable = self.omega_integral(self.k, cap)?;
        if reachable <= target {
            return Ok(BihariOutcome::OutOfDomain { target, reachable });
        }
        // invariant: ∫_k^lo = acc ≤ target < ∫_k^hi
        let (mut lo, mut hi, mut acc) = (self.k, cap, 0.0);
        for _ in 0..400 {
            let mid = if lo > 0.0 { libm::sqrt(lo * hi) } else { 0.5 * hi };
            if mid <= lo || mid >= hi {
                break;
            }
            let piece = self.omega_integral(lo, mid)?;
            if acc + piece <= target {
                lo = mid;
                acc += piece;
            } else {
                hi = mid;
            }
            if hi - lo <= BISECTION_REL_TOL * hi {
                break;
            }
        }
        Ok(BihariOutcome::Bound { value: 0.5 * (lo + hi) })
    }

    /// RK4 solution of `g' = M h(t) c(t) ω(g)`, `g(a) = g_start`, sampled at `times`.
    /// Entries after the path leaves `[0, cap]` or turns non-finite are `None`.
    pub fn path(&self, g_start: f64, c: impl Fn(f64) -> f64, times: &[f64], steps: usize) -> Vec<Option<f64>> {
        let a = self.h.start();
        let span = self.h.end() - a;
        let dt = span / steps as f64;
        let rhs = |t: f64, g: f64| self.m * self.h.eval(t) * c(t) * self.omega.eval(g.max(0.0));
        let cap = self.cap();
        let mut out = Vec::with_capacity(times.len());
        let (mut t, mut g, mut alive) = (a, g_start, true);
        let mut next = 0;
        let mut step = 0usize;
        while next < times.len() {
            let target = times[next];
            if !alive {
                out.push(None);
                next += 1;
                continue;
            }
            // advance on the uniform grid, finishing with a partial step onto `target`
            while t < target {
                let full = a + (step + 1) as f64 * dt;
                let tn = if full <= target { full } else { target };
                let hstep = tn - t;
                let k1 = rhs(t, g);
                let k2 = rhs(t + 0.5 * hstep, g + 0.5 * hstep * k1);
                let k3 = rhs(t + 0.5 * hstep, g + 0.5 * hstep * k2);
                let k4 = rhs(tn, g + hstep * k3);
                g += hstep / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if tn == full {
                    step += 1;
                }
                t = tn;
                if !g.is_finite() || g > cap {
                    alive = false;
                    break;
                }
            }
            out.push(if alive { Some(g) } else { None });
            next += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BihariVerifyReport {
    pub problem: BihariProblem,
    pub trials: usize,
    pub seed: u64,
    /// `max (g − bound)/max(bound, 1)` over all trials and sample points.
    pub max_violation: f64,
    pub points_checked: usize,
    /// Points skipped because the bound was out of domain there.
    pub points_out_of_domain: usize,
}

/// Sample points per trial in [`bihari_verify`].
pub const BIHARI_SAMPLES: usize = 100;
const BIHARI_RK4_STEPS: usize = 4000;
const BIHARI_KNOTS: usize = 9;

/// Draws `trials` admissible functions `g ≤ k + M∫h ω(g)` and measures how far they
/// rise above the bound. Trial 0 is the equality path `V` with `c ≡ 1`; later trials
/// use `g(a) = k·U[½,1]` and a random piecewise-linear `c(t) ∈ [0, 1]`.
pub fn bihari_verify(prob: &BihariProblem, trials: usize, seed: u64) -> Result<BihariVerifyReport> {
    prob.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let (a, b) = (prob.h.start(), prob.h.end());
    let times: Vec<f64> = (0..BIHARI_SAMPLES).map(|i| a + (b - a) * i as f64 / (BIHARI_SAMPLES - 1) as f64).collect();
    let bounds = times.iter().map(|&t| prob.bound(t)).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;

    let mut max_violation = f64::NEG_INFINITY;
    let (mut checked, mut skipped) = (0, 0);
    for trial in 0..trials {
        let (g0, knots) = if trial == 0 {
            (prob.k, Table::constant(a, b, 1.0)?)
        } else {
            let g0 = prob.k * (0.5 + 0.5 * unit());
            let nodes = (0..BIHARI_KNOTS).map(|i| a + (b - a) * i as f64 / (BIHARI_KNOTS - 1) as f64).collect();
            let values = (0..BIHARI_KNOTS).map(|_| unit()).collect();
            (g0, Table::new(nodes, values)?)
        };
        let path = prob.path(g0, |t| knots.eval(t), &times, BIHARI_RK4_STEPS);
        for (g, bound) in path.iter().zip(&bounds) {
            match (g, bound.value()) {
                (Some(g), Some(v)) => {
                    max_violation = max_violation.max((g - v) / v.max(1.0));
                    checked += 1;
                }
                _ => skipped += 1,
            }
        }
    }
    Ok(BihariVerifyReport {
        problem: prob.clone(),
        trials,
        seed,
        max_violation,
        points_checked: checked,
        points_out_of_domain: skipped,
    })
}

// ---------------------------------------------------------------- Strauss

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraussCase {
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraussReport {
    pub case: StraussCase,
    /// `c₁ c₂^{1/(γ−1)}`.
    pub lhs: f64,
    /// `(1 − 1/γ) γ^{−1/(γ−1)}`.
    pub threshold: f64,
    pub condition_holds: bool,
    /// `c₁/(1 − 1/γ)`; meaningful only when the condition holds.
    pub bound: f64,
}

impl StraussCase {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0) || !(self.c2 > 0.0) || !(self.gamma > 1.0) {
            return Err(Error::InvalidArgument("need c1 > 0, c2 > 0 and gamma > 1".into()));
        }
        if !self.c1.is_finite() || !self.c2.is_finite() || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument("Strauss parameters must be finite".into()));
        }
        Ok(())
    }

    /// Maximiser `m* = (γc₂)^{−1/(γ−1)}` of `m − c₂m^γ`. The fixed-point map diverges
    /// from 0 exactly when an iterate passes it.
    pub fn critical_point(&self) -> f64 {
        libm::pow(self.gamma * self.c2, -1.0 / (self.gamma - 1.0))
    }
}

pub fn strauss_check(case: StraussCase) -> Result<StraussReport> {
    case.validate()?;
    let e = 1.0 / (case.gamma - 1.0);
    let lhs = case.c1 * libm::pow(case.c2, e);
    let threshold = (1.0 - 1.0 / case.gamma) * libm::pow(case.gamma, -e);
    Ok(StraussReport {
        case,
        lhs,
        threshold,
        condition_holds: lhs < threshold,
        bound: case.c1 / (1.0 - 1.0 / case.gamma),
    })
}

const FIXED_POINT_MAX_ITER: usize = 1_000_000;

/// Limit of `m ↦ c₁ + c₂m^γ` from `m = 0`: the smallest root of `m = c₁ + c₂m^γ`.
pub fn strauss_fixed_point(case: StraussCase) -> Result<f64> {
    case.validate()?;
    let m_star = case.critical_point();
    let mut m = 0.0f64;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = case.c1 + case.c2 * libm::pow(m, case.gamma);
        if next > m_star {
            return Err(Error::Divergent(alloc::format!("iterate {next} passed the critical point {m_star}")));
        }
        if (next - m).abs() <= 1e-15 * next {
            return Ok(next);
        }
        m = next;
    }
    Ok(m)
}

// ---------------------------------------------------------------- Young

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoungReport {
    #[serde(with = "crate::exponent_serde")]
    pub p: f64,
    #[serde(with = "crate::exponent_serde")]
    pub q: f64,
    #[serde(with = "crate::exponent_serde")]
    pub r: f64,
    /// `‖f ∗ g‖_{L^r}`.
    pub lhs: f64,
    /// `‖f‖_{L^p}‖g‖_{L^q}`.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Periodic convolution `(f ∗ g)(x) = ∫ f(y) g(x − y) dy` on the centered grid.
pub fn periodic_convolution(f: &Field, g: &Field) -> Result<Field> {
    let grid = *f.grid();
    if grid != *g.grid() {
        return Err(Error::GridMismatch);
    }
    let (fs, gs) = (f.forward(), g.forward());
    let coeffs = fs.coeffs().iter().zip(gs.coeffs()).map(|(a, b)| a * b).collect();
    let raw = Spectrum::new(grid, coeffs)?.inverse()?;
    // x_i − y_j sits at index i − j + N/2, so shift the cyclic result by N/2 per axis
    let n = grid.n();
    let w = grid.cell_volume();
    let src = raw.samples();
    let samples = (0..grid.len())
        .map(|i| {
            let ax = grid.axes(i);
            let mut shifted = [0usize; 2];
            for d in 0..grid.dim() {
                shifted[d] = (ax[d] + n / 2) % n;
            }
            w * src[grid.flat(shifted)]
        })
        .collect();
    Field::new(grid, samples)
}

fn reciprocal(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// Checks `‖f ∗ g‖_{L^r} ≤ ‖f‖_{L^p}‖g‖_{L^q}` with `1/r = 1/p + 1/q − 1`.
pub fn young_check(f: &Field, g: &Field, p: f64, q: f64) -> Result<YoungReport> {
    for e in [p, q] {
        if !(e >= 1.0) {
            return Err(Error::InvalidExponent(e));
        }
    }
    let inv_r = reciprocal(p) + reciprocal(q) - 1.0;
    if inv_r < -1e-15 {
        return Err(Error::InvalidArgument(alloc::format!("1/p + 1/q = {} < 1", inv_r + 1.0)));
    }
    let r = if inv_r <= 1e-15 { f64::INFINITY } else { 1.0 / inv_r };
    let conv = periodic_convolution(f, g)?;
    let lhs = lp_norm(&conv, r)?;
    let rhs = lp_norm(f, p)? * lp_norm(g, q)?;
    Ok(YoungReport { p, q, r, lhs, rhs, slack: rhs - lhs, holds: lhs <= rhs * (1.0 + 1e-12) })
}

// ---------------------------------------------------------------- Gagliardo–Nirenberg

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GagliardoReport {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub theta: f64,
    pub lq: f64,
    pub lp: f64,
    /// `‖ |k|^s û ‖_{L^p}`, the homogeneous `Ẇ^{s,p}` seminorm.
    pub wsp: f64,
    /// `‖u‖_q / (‖u‖_p^{1−θ}‖u‖_{Ẇ^{s,p}}^θ)`.
    pub ratio: f64,
    /// `(λ, ratio)` for the rescaled copies `u(λx)`.
    pub scale_family: Vec<[f64; 2]>,
    /// Largest relative spread of the ratio over the scale family.
    pub scale_spread: f64,
}

/// `‖ |k|^s û ‖_{L^p}` with `|k|^s` realised as a Fourier multiplier.
pub fn homogeneous_sobolev_norm(u: &Field, s: f64, p: f64) -> Result<f64> {
    let weights = wavenumber_power(u.grid(), s);
    lp_norm(&u.forward().multiply(&weights).inverse()?, p)
}

fn gagliardo_ratio(u: &Field, p: f64, q: f64, s: f64, theta: f64) -> Result<[f64; 4]> {
    let lq = lp_norm(u, q)?;
    let lp = lp_norm(u, p)?;
    let wsp = homogeneous_sobolev_norm(u, s, p)?;
    let ratio = lq / (libm::pow(lp, 1.0 - theta) * libm::pow(wsp, theta));
    Ok([lq, lp, wsp, ratio])
}

/// Scales of the `u(λx)` family: same samples on a box of length `L/λ`.
pub const GAGLIARDO_SCALES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

pub fn gagliardo_spot_check(u: &Field, p: f64, q: f64, s: f64, theta: f64) -> Result<GagliardoReport> {
    if !(p >= 1.0) || !(q >= 1.0) {
        return Err(Error::InvalidExponent(if p >= 1.0 { q } else { p }));
    }
    if !(theta > 0.0 && theta < 1.0) || !(s > 0.0) {
        return Err(Error::InvalidArgument("need 0 < theta < 1 and s > 0".into()));
    }
    let d = u.grid().dim() as f64;
    let mismatch = reciprocal(q) - (reciprocal(p) - theta * s / d);
    if mismatch.abs() > 1e-12 {
        return Err(Error::InvalidArgument(alloc::format!("1/q - (1/p - theta s/d) = {mismatch:e}")));
    }
    let [lq, lp, wsp, ratio] = gagliardo_ratio(u, p, q, s, theta)?;
    if !ratio.is_finite() {
        return Err(Error::Divergent("Gagliardo-Nirenberg ratio is not finite".into()));
    }
    let grid = *u.grid();
    let mut scale_family = Vec::new();
    let mut spread = 0.0f64;
    for lambda in GAGLIARDO_SCALES {
        let g = crate::grid::GridSpec::new(grid.dim(), grid.n(), grid.length() / lambda)?;
        let scaled = Field::new(g, u.samples().to_vec())?;
        let r = gagliardo_ratio(&scaled, p, q, s, theta)?[3];
        spread = spread.max((r - ratio).abs() / ratio);
        scale_family.push([lambda, r]);
    }
    Ok(GagliardoReport { p, q, s, theta, lq, lp, wsp, ratio, scale_family, scale_spread: spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use core::f64::consts::PI;
    use proptest::prelude::*;
    use rand_core::RngCore;

    fn beta_oracle(x: f64, y: f64) -> f64 {
        use statrs::function::gamma::ln_gamma;
        libm::exp(ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y))
    }

    #[test]
    fn beta_examples() {
        assert!((beta_integral_constant(0.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((beta_integral_constant(0.5, 0.5).unwrap() - PI).abs() < 1e-8 * PI);
        let c = beta_integral_constant(0.5, 0.25).unwrap();
        let o = beta_oracle(0.5, 0.75);
        assert!((c - o).abs() < 1e-8 * o, "{c} vs {o}");
        assert!(matches!(beta_integral_constant(1.0, 0.2), Err(Error::Divergent(_))));
        assert!(matches!(beta_integral_constant(0.2, 1.5), Err(Error::Divergent(_))));
    }

    #[test]
    fn beta_scaling_collapses() {
        for (a, b) in [(0.5, 0.5), (0.75, 0.25), (-0.5, 0.9), (0.25, 0.0)] {
            let r = beta_report(a, b).unwrap();
            assert!(r.max_collapse_error < 1e-6, "a={a} b={b}: {}", r.max_collapse_error);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn beta_matches_log_gamma_and_is_symmetric(a in -1.0f64..0.95, b in -1.0f64..0.95) {
            let c = beta_integral_constant(a, b).unwrap();
            let o = beta_oracle(1.0 - a, 1.0 - b);
            prop_assert!((c - o).abs() < 1e-8 * o, "a={} b={} {} vs {}", a, b, c, o);
            let s = beta_integral_constant(b, a).unwrap();
            prop_assert!((c - s).abs() < 1e-10 * c);
        }
    }

    fn constant_h(m: f64, k: f64, omega: Omega, end: f64) -> BihariProblem {
        BihariProblem { k, m, h: Table::constant(0.0, end, 1.0).unwrap(), omega, u0: 1.0 }
    }

    #[test]
    fn bihari_gronwall_closed_form() {
        let h = Table::new(alloc::vec![0.0, 0.5, 1.0, 2.0], alloc::vec![1.0, 3.0, 0.5, 2.0]).unwrap();
        let prob = BihariProblem { k: 0.7, m: 1.3, h, omega: Omega::Identity, u0: 2.0 };
        for t in [0.0, 0.3, 0.75, 1.6, 2.0] {
            let want = 0.7 * libm::exp(1.3 * prob.h.integral_to(t));
            let got = prob.bound(t).unwrap().value().unwrap();
            assert!((got - want).abs() < 1e-8 * want, "t={t}: {got} vs {want}");
        }
        // the table integral itself: trapezoids of the interpolant
        assert!((prob.h.integral_to(2.0) - (1.0 + 0.875 + 1.25)).abs() < 1e-15);
    }

    #[test]
    fn bihari_zero_growth_returns_k() {
        let prob = constant_h(0.0, 3.25, Omega::Power { gamma: 2.0 }, 1.0);
        assert_eq!(prob.bound(0.6).unwrap(), BihariOutcome::Bound { value: 3.25 });
    }

    #[test]
    fn bihari_quadratic_blows_up_at_one() {
        let prob = constant_h(1.0, 1.0, Omega::Power { gamma: 2.0 }, 2.0);
        for t in [0.1, 0.5, 0.9, 0.999] {
            let got = prob.bound(t).unwrap().value().unwrap();
            let want = 1.0 / (1.0 - t);
            assert!((got - want).abs() < 1e-8 * want, "t={t}: {got} vs {want}");
        }
        for t in [1.0, 1.5] {
            assert!(matches!(prob.bound(t).unwrap(), BihariOutcome::OutOfDomain { .. }));
        }
    }

    #[test]
    fn bihari_rejects_vanishing_omega() {
        let prob = constant_h(1.0, 0.0, Omega::Identity, 1.0);
        assert!(matches!(prob.bound(0.5), Err(Error::Divergent(_))));
        let table = Table::new(alloc::vec![0.0, 1.0, 5.0], alloc::vec![0.0, 0.0, 2.0]).unwrap();
        let prob = BihariProblem { k: 0.5, m: 1.0, h: Table::constant(0.0, 1.0, 1.0).unwrap(), omega: Omega::Table(table), u0: 2.0 };
        assert!(matches!(prob.bound(0.5), Err(Error::Divergent(_))));
    }

    #[test]
    fn bihari_is_monotone() {
        let omega = Omega::Power { gamma: 1.5 };
        let base = |k: f64, m: f64| constant_h(m, k, omega.clone(), 1.0);
        let mut prev = 0.0;
        for t in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
            let v = base(0.5, 1.0).bound(t).unwrap().value().unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for k in [0.01, 0.1, 0.3, 0.5] {
            let v = base(k, 1.0).bound(0.7).unwrap().value().unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for m in [0.0, 0.5, 1.0, 2.0] {
            let v = base(0.5, m).bound(0.7).unwrap().value().unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn bihari_k_to_zero_limit() {
        // Ω(0) diverges for ω(u) = u, while the bound tends to 0 as k → 0⁺
        let mut prev = f64::INFINITY;
        for k in [1e-1, 1e-3, 1e-6, 1e-9] {
            let v = constant_h(1.0, k, Omega::Identity, 1.0).bound(1.0).unwrap().value().unwrap();
            assert!(v < prev && (v - k * libm::exp(1.0)).abs() < 1e-8 * v);
            prev = v;
        }
        assert!(matches!(constant_h(1.0, 0.0, Omega::Identity, 1.0).bound(1.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn bihari_equality_path_is_tight() {
        let prob = constant_h(1.0, 1.0, Omega::Power { gamma: 2.0 }, 0.9);
        let times = [0.0, 0.3, 0.6, 0.9];
        let v = prob.path(1.0, |_| 1.0, &times, 4000);
        for (t, g) in times.iter().zip(&v) {
            let g = g.unwrap();
            let b = prob.bound(*t).unwrap().value().unwrap();
            assert!((g - b).abs() < 1e-8 * b, "t={t}: {g} vs {b}");
            // half of an admissible path is admissible and sits strictly below
            assert!(0.5 * g < b);
        }
    }

    #[test]
    fn bihari_verify_reports_no_violation() {
        for omega in [Omega::Identity, Omega::Power { gamma: 2.0 }, Omega::Power { gamma: 0.5 }] {
            let prob = constant_h(1.0, 0.5, omega, 1.5);
            let r = bihari_verify(&prob, 20, 7).unwrap();
            assert!(r.max_violation <= 1e-8, "{:?}", r.max_violation);
            assert!(r.points_checked > 0);
        }
        let h = Table::new(alloc::vec![0.0, 0.5, 1.0], alloc::vec![2.0, 0.0, 1.0]).unwrap();
        let prob = BihariProblem { k: 0.2, m: 1.0, h, omega: Omega::Identity, u0: 1.0 };
        let r = bihari_verify(&prob, 10, 3).unwrap();
        assert!(r.max_violation.abs() <= 1e-8, "equality trial should be tight: {}", r.max_violation);
    }

    #[test]
    fn strauss_examples() {
        let r = strauss_check(StraussCase { c1: 0.1, c2: 1.0, gamma: 2.0 }).unwrap();
        assert!(r.condition_holds);
        assert!((r.threshold - 0.25).abs() < 1e-15 && (r.bound - 0.2).abs() < 1e-15);
        let r = strauss_check(StraussCase { c1: 0.3, c2: 1.0, gamma: 2.0 }).unwrap();
        assert!(!r.condition_holds);
        let m = strauss_fixed_point(StraussCase { c1: 0.1, c2: 1.0, gamma: 2.0 }).unwrap();
        let oracle = (1.0 - libm::sqrt(1.0 - 0.4)) / 2.0;
        assert!((m - oracle).abs() < 1e-12 && m < 0.2);
        assert!(strauss_fixed_point(StraussCase { c1: 0.3, c2: 1.0, gamma: 2.0 }).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn strauss_condition_matches_fixed_point(c1 in 0.01f64..1.0, c2 in 0.05f64..3.0, gamma in 1.2f64..4.0) {
            let case = StraussCase { c1, c2, gamma };
            let r = strauss_check(case).unwrap();
            // stay clear of the tangent case where the iteration crawls
            prop_assume!((r.lhs - r.threshold).abs() > 1e-3 * r.threshold);
            let fp = strauss_fixed_point(case);
            prop_assert_eq!(r.condition_holds, fp.is_ok());
            if let Ok(m) = fp {
                prop_assert!(m < r.bound);
                prop_assert!((m - (c1 + c2 * libm::pow(m, gamma))).abs() < 1e-12);
            }
        }

        #[test]
        fn strauss_rescaling(c1 in 0.01f64..1.0, c2 in 0.05f64..3.0, gamma in 1.2f64..4.0, lambda in 0.1f64..10.0) {
            let r = strauss_check(StraussCase { c1, c2, gamma }).unwrap();
            let s = strauss_check(StraussCase { c1: lambda * c1, c2: libm::pow(lambda, 1.0 - gamma) * c2, gamma }).unwrap();
            prop_assert!((s.lhs - r.lhs).abs() < 1e-12 * r.lhs);
            prop_assume!((r.lhs - r.threshold).abs() > 1e-9 * r.threshold);
            prop_assert_eq!(r.condition_holds, s.condition_holds);
            prop_assert!((s.bound - lambda * r.bound).abs() < 1e-12 * s.bound);
        }
    }

    fn bump(g: GridSpec, w: f64, c: [f64; 2]) -> Field {
        Field::from_fn(g, |x| {
            let r2: f64 = (0..g.dim()).map(|i| (x[i] - c[i]) * (x[i] - c[i])).sum();
            libm::exp(-r2 / (2.0 * w * w))
        })
        .unwrap()
    }

    #[test]
    fn young_delta_is_identity() {
        let g = GridSpec::new(2, 32, 8.0).unwrap();
        let f = bump(g, 0.7, [0.5, -1.0]);
        let mut delta = alloc::vec![0.0; g.len()];
        delta[g.flat([16, 16])] = 1.0 / g.cell_volume();
        let delta = Field::new(g, delta).unwrap();
        let conv = periodic_convolution(&f, &delta).unwrap();
        for (a, b) in conv.samples().iter().zip(f.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = young_check(&f, &delta, 3.0, 1.0).unwrap();
        assert!((r.r - 3.0).abs() < 1e-14);
        assert!((r.lhs - r.rhs).abs() < 1e-10 * r.rhs);
    }

    #[test]
    fn young_convolution_matches_direct_sum() {
        let g = GridSpec::new(1, 16, 5.0).unwrap();
        let f = Field::from_fn(g, |x| libm::sin(x[0]) + 0.3).unwrap();
        let k = bump(g, 0.4, [0.8, 0.0]);
        let conv = periodic_convolution(&f, &k).unwrap();
        let n = 16;
        for i in 0..n {
            let direct: f64 =
                (0..n).map(|j| f.samples()[j] * k.samples()[(i + n + n / 2 - j) % n] * g.spacing()).sum();
            assert!((conv.samples()[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn young_random_and_fubini() {
        let g = GridSpec::new(2, 32, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rand_field = || {
            let v = (0..g.len()).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64).collect();
            Field::new(g, v).unwrap()
        };
        let (f, h) = (rand_field(), rand_field());
        let r = young_check(&f, &h, 2.0, 2.0).unwrap();
        assert!(r.r.is_infinite() && r.holds && r.slack > 0.0);

        let a = bump(g, 0.5, [0.0, 0.0]);
        let b = bump(g, 0.8, [1.0, 0.5]);
        let r = young_check(&a, &b, 1.0, 1.0).unwrap();
        assert_eq!(r.r, 1.0);
        assert!((r.lhs - r.rhs).abs() < 1e-8 * r.rhs);

        assert!(young_check(&a, &b, 1.5, 1.5).is_ok());
        assert!(matches!(young_check(&a, &b, 3.0, 3.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gagliardo_bump_ratio_is_finite_and_scale_free() {
        let g = GridSpec::new(2, 64, 16.0).unwrap();
        let u = bump(g, 1.0, [0.0, 0.0]);
        let r = gagliardo_spot_check(&u, 1.5, 2.0, 1.0, 1.0 / 3.0).unwrap();
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
        assert!(r.scale_spread < 1e-10, "{}", r.scale_spread);
        let doubled = gagliardo_spot_check(&u.scale(2.0).unwrap(), 1.5, 2.0, 1.0, 1.0 / 3.0).unwrap();
        assert!((doubled.ratio - r.ratio).abs() < 1e-12 * r.ratio);
        assert!(gagliardo_spot_check(&u, 1.5, 2.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn gagliardo_single_mode() {
        let g = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let u = Field::from_fn(g, |x| libm::cos(3.0 * x[0] + 4.0 * x[1])).unwrap();
        // s = 1, θ = 1/2: 1/q = 1/2 − 1/4
        let theta = 0.5;
        let r = gagliardo_spot_check(&u, 2.0, 4.0, 1.0, theta).unwrap();
        // |k| = 5: Ẇ^{s,p} = 5^s ‖u‖_p
        assert!((r.wsp - 5.0 * r.lp).abs() < 1e-10 * r.wsp);
        let closed = r.lq / (r.lp * libm::pow(5.0, theta));
        assert!((r.ratio - closed).abs() < 1e-12 * closed);
    }
}
