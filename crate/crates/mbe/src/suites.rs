//! Self-contained verification suites for the kernel and the integral inequalities.
//! Every random draw is seeded and the seed is echoed in the report.

use anyhow::Result;
use mbe_core::bounds::{
    beta_integral_constant, beta_report, bihari_verify, strauss_check, strauss_fixed_point, BetaReport, BihariOutcome,
    BihariProblem, BihariVerifyReport, Omega, StraussCase, Table,
};
use mbe_core::semigroup::{kernel_physical, verify_kernel_scaling, KernelScalingReport};
use mbe_core::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------- kernel

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSample {
    pub d: usize,
    pub t: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSuite {
    pub n: usize,
    pub length: f64,
    /// `‖k_t‖_∞` per dimension.
    pub sup: Vec<KernelScalingReport>,
    /// `‖∇k_t‖_{L¹}` per dimension.
    pub grad_l1: Vec<KernelScalingReport>,
    /// `‖k_t‖_{L¹}`, which is flat in `t`.
    pub l1: Vec<KernelScalingReport>,
    pub masses: Vec<MassSample>,
}

/// Six log-spaced times over `[t0, 10 t0]`.
pub fn decade(t0: f64) -> Vec<f64> {
    (0..6).map(|i| t0 * 10f64.powf(i as f64 / 5.0)).collect()
}

pub fn kernel_suite(n: usize, length: f64, t0: f64) -> Result<KernelSuite> {
    let times = decade(t0);
    let mut s = KernelSuite { n, length, sup: vec![], grad_l1: vec![], l1: vec![], masses: vec![] };
    for d in [1, 2] {
        let g = GridSpec::new(d, n, length)?;
        s.sup.push(verify_kernel_scaling(g, 0, f64::INFINITY, &times)?);
        s.grad_l1.push(verify_kernel_scaling(g, 1, 1.0, &times)?);
        s.l1.push(verify_kernel_scaling(g, 0, 1.0, &times)?);
        for &t in &times {
            let k = kernel_physical(t, g)?;
            s.masses.push(MassSample { d, t, mass: k.samples().iter().sum::<f64>() * g.cell_volume() });
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------- Beta

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSuite {
    pub seed: u64,
    /// `C_{1/2,1/2}`, which equals `π`.
    pub half_half: f64,
    pub random: Vec<BetaReport>,
}

/// `pairs` random `(a, b)` with `a, b ∈ [−0.5, 0.9)`.
pub fn beta_suite(pairs: usize, seed: u64) -> Result<BetaSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = (0..pairs)
        .map(|_| beta_report(rng.gen_range(-0.5..0.9), rng.gen_range(-0.5..0.9)))
        .collect::<mbe_core::Result<Vec<_>>>()?;
    Ok(BetaSuite { seed, half_half: beta_integral_constant(0.5, 0.5)?, random })
}

// ---------------------------------------------------------------- Bihari

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallSample {
    pub t: f64,
    pub bound: f64,
    /// `k·exp(M∫h)`.
    pub closed_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BihariSuite {
    pub gronwall: Vec<GronwallSample>,
    pub gronwall_max_rel_error: f64,
    pub trials: Vec<BihariVerifyReport>,
    /// First `t` at which `ω(u) = u²`, `k = M = h = 1` leaves the domain; exactly 1.
    pub blowup_time: f64,
}

fn constant_problem(k: f64, m: f64, omega: Omega, end: f64) -> Result<BihariProblem> {
    Ok(BihariProblem { k, m, h: Table::constant(0.0, end, 1.0)?, omega, u0: 1.0 })
}

/// Bisects the boundary between `Bound` and `OutOfDomain` on `[lo, hi]`.
pub fn blowup_boundary(prob: &BihariProblem, mut lo: f64, mut hi: f64) -> Result<f64> {
    let inside = |t: f64| -> Result<bool> { Ok(matches!(prob.bound(t)?, BihariOutcome::Bound { .. })) };
    anyhow::ensure!(inside(lo)? && !inside(hi)?, "boundary not bracketed by [{lo}, {hi}]");
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if inside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn bihari_suite(trials: usize, seed: u64) -> Result<BihariSuite> {
    let h = Table::new(vec![0.0, 0.5, 1.0, 2.0], vec![1.0, 3.0, 0.5, 2.0])?;
    let gw = BihariProblem { k: 0.7, m: 1.3, h, omega: Omega::Identity, u0: 2.0 };
    let mut gronwall = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..=20 {
        let t = 0.1 * i as f64;
        let closed_form = gw.k * (gw.m * gw.h.integral_to(t)).exp();
        let bound = gw.bound(t)?.value().unwrap_or(f64::NAN);
        worst = worst.max((bound - closed_form).abs() / closed_form);
        gronwall.push(GronwallSample { t, bound, closed_form });
    }
    let problems = [
        constant_problem(1.0, 0.5, Omega::Identity, 1.5)?,
        constant_problem(1.0, 0.5, Omega::Power { gamma: 2.0 }, 1.5)?,
        constant_problem(1.0, 0.5, Omega::Power { gamma: 0.5 }, 1.5)?,
        gw.clone(),
    ];
    let trials = problems
        .iter()
        .enumerate()
        .map(|(i, p)| bihari_verify(p, trials, seed + i as u64))
        .collect::<mbe_core::Result<Vec<_>>>()?;
    let quad = constant_problem(1.0, 1.0, Omega::Power { gamma: 2.0 }, 2.0)?;
    Ok(BihariSuite { gronwall, gronwall_max_rel_error: worst, trials, blowup_time: blowup_boundary(&quad, 0.5, 1.5)? })
}

// ---------------------------------------------------------------- Strauss

/// Cases within this relative distance of the threshold are tangent: the iteration
/// creeps and its verdict is not decisive.
pub const STRAUSS_TANGENT_BAND: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StraussSuite {
    pub seed: u64,
    pub cases: usize,
    pub holds: usize,
    pub tangent: usize,
    /// Decisive cases where the condition and the fixed-point oracle disagree.
    pub disagreements: Vec<StraussCase>,
    /// Condition-holds cases whose fixed point reaches `c₁/(1−γ⁻¹)`.
    pub bound_violations: Vec<StraussCase>,
    /// `max fixed_point / bound` over condition-holds cases.
    pub max_bound_ratio: f64,
}

pub fn strauss_suite(cases: usize, seed: u64) -> Result<StraussSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = StraussSuite {
        seed,
        cases,
        holds: 0,
        tangent: 0,
        disagreements: vec![],
        bound_violations: vec![],
        max_bound_ratio: 0.0,
    };
    for _ in 0..cases {
        let case = StraussCase { c1: rng.gen_range(0.01..1.0), c2: rng.gen_range(0.05..3.0), gamma: rng.gen_range(1.2..4.0) };
        let r = strauss_check(case)?;
        let fp = strauss_fixed_point(case);
        if r.condition_holds {
            s.holds += 1;
            if let Ok(m) = fp {
                s.max_bound_ratio = s.max_bound_ratio.max(m / r.bound);
                if m >= r.bound {
                    s.bound_violations.push(case);
                }
            }
        }
        if (r.lhs - r.threshold).abs() <= STRAUSS_TANGENT_BAND * r.threshold {
            s.tangent += 1;
        } else if r.condition_holds != fp.is_ok() {
            s.disagreements.push(case);
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsLab {
    pub beta: BetaSuite,
    pub bihari: BihariSuite,
    pub strauss: StraussSuite,
}

pub fn bounds_lab(seed: u64) -> Result<BoundsLab> {
    Ok(BoundsLab { beta: beta_suite(5, seed)?, bihari: bihari_suite(100, seed)?, strauss: strauss_suite(1000, seed)? })
}
