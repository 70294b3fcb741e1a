//! The biharmonic heat propagator `e^{−tΔ²}` as a Fourier multiplier, its
//! physical-space kernel, and the exponential-integrator weights φ₁, φ₂.
//!
//! Normalisation: the multiplier acts directly on DFT coefficients, and the
//! physical kernel is scaled so its discrete integral `h^d Σ k_t` is one.

use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Spectrum, Transform};
use crate::grid::GridSpec;
use crate::spectral::{boundary_shell_max, lp_norm_samples, tail_fraction};
use crate::stats::fit_loglog;

/// Below this `|z|` φ₁ switches to its Taylor series.
pub const PHI1_SERIES_THRESHOLD: f64 = 1e-3;
/// Below this `|z|` φ₂ switches to its Taylor series.
pub const PHI2_SERIES_THRESHOLD: f64 = 0.5;
/// Kernel resolution limits: spectral tail energy and boundary amplitude ratio.
pub const KERNEL_TAIL_LIMIT: f64 = 1e-8;
pub const KERNEL_WRAP_LIMIT: f64 = 1e-8;

/// `φ₁(z) = (e^z − 1)/z`, `φ₁(0) = 1`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < PHI1_SERIES_THRESHOLD {
        // 1 + z/2 + z²/6 + z³/24 + z⁴/120 + z⁵/720
        1.0 + z * (1.0 / 2.0 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0))))
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        libm::expm1(z) / z
    }
}

/// `φ₂(z) = (e^z − 1 − z)/z²`, `φ₂(0) = 1/2`.
pub fn phi2(z: f64) -> f64 {
    if z.abs() < PHI2_SERIES_THRESHOLD {
        // Σ z^j/(j+2)!, 20 terms reach 1e-17 for |z| < 1/2
        let mut term = 0.5;
        let mut sum = 0.5;
        for j in 1..20 {
            term *= z / (j + 2) as f64;
            sum += term;
        }
        sum
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        (libm::expm1(z) - z) / (z * z)
    }
}

/// Real non-negative weights over the wavevectors of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    grid: GridSpec,
    weights: Vec<f64>,
}

impl Multiplier {
    fn build(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        let weights = (0..grid.len())
            .map(|i| {
                let k2 = grid.wavevector_norm_sq(i);
                f(k2 * k2)
            })
            .collect();
        Self { grid, weights }
    }

    /// `exp(−t|k|⁴)`.
    pub fn semigroup(grid: GridSpec, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        Ok(Self::build(grid, |k4| libm::exp(-t * k4)))
    }

    /// `φ₁(−t|k|⁴)`.
    pub fn phi1(grid: GridSpec, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("phi1 multiplier needs t > 0, got {t}")));
        }
        Ok(Self::build(grid, |k4| phi1(-t * k4)))
    }

    /// `φ₂(−t|k|⁴)`.
    pub fn phi2(grid: GridSpec, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("phi2 multiplier needs t > 0, got {t}")));
        }
        Ok(Self::build(grid, |k4| phi2(-t * k4)))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, s: &Spectrum) -> Result<Spectrum> {
        if *s.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(s.multiply(&self.weights))
    }
}

pub fn apply_semigroup(f: &Field, t: f64) -> Result<Field> {
    let m = Multiplier::semigroup(*f.grid(), t)?;
    let tr = Transform::new(*f.grid());
    tr.inverse(&m.apply(&tr.forward(f))?)
}

/// Moves the origin from index 0 to the centre index `N/2` on every axis.
fn center(grid: &GridSpec, samples: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let half = n / 2;
    let mut out = alloc::vec![0.0; samples.len()];
    for (i, v) in samples.iter().enumerate() {
        let a = grid.axes(i);
        let shifted = [(a[0] + half) % n, if grid.dim() == 2 { (a[1] + half) % n } else { 0 }];
        out[grid.flat(shifted)] = *v;
    }
    out
}

fn resolution_check(grid: &GridSpec, t: f64, weights: &[f64], centered: &[f64]) -> Result<()> {
    let coeffs: Vec<Complex64> = weights.iter().map(|w| Complex64::new(*w, 0.0)).collect();
    let tail = tail_fraction(&Spectrum::new(*grid, coeffs)?);
    let max = centered.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let shell = boundary_shell_max(&Field::new(*grid, centered.to_vec())?);
    let wrap = if max > 0.0 { shell / max } else { f64::INFINITY };
    if tail < KERNEL_TAIL_LIMIT && wrap < KERNEL_WRAP_LIMIT {
        Ok(())
    } else {
        Err(Error::UnresolvedKernel { t, tail, wrap })
    }
}

/// The kernel `k_t` sampled with its origin at the grid centre.
pub fn kernel_physical(t: f64, grid: GridSpec) -> Result<Field> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("kernel needs t > 0, got {t}")));
    }
    let m = Multiplier::semigroup(grid, t)?;
    let tr = Transform::new(grid);
    let coeffs: Vec<Complex64> = m.weights().iter().map(|w| Complex64::new(*w, 0.0)).collect();
    let scale = 1.0 / grid.cell_volume();
    let raw: Vec<f64> = tr.inverse_samples(&coeffs).into_iter().map(|x| x * scale).collect();
    let centered = center(&grid, &raw);
    resolution_check(&grid, t, m.weights(), &centered)?;
    Field::new(grid, centered)
}

/// `‖D^n k_t‖_{L^p}` with the pointwise Euclidean (Frobenius) norm over all
/// `d^n` derivatives of order `n`.
pub fn kernel_derivative_norm(t: f64, grid: GridSpec, order: u32, p: f64) -> Result<f64> {
    // validates resolution and t
    kernel_physical(t, grid)?;
    let m = Multiplier::semigroup(grid, t)?;
    let tr = Transform::new(grid);
    let d = grid.dim();
    let scale = 1.0 / grid.cell_volume();
    let mut sq = alloc::vec![0.0; grid.len()];
    let combos = d.pow(order);
    for combo in 0..combos {
        let mut axes = Vec::with_capacity(order as usize);
        let mut c = combo;
        for _ in 0..order {
            axes.push(c % d);
            c /= d;
        }
        let coeffs: Vec<Complex64> = m
            .weights()
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let a = grid.axes(i);
                let mut z = Complex64::new(*w, 0.0);
                for &ax in &axes {
                    z *= Complex64::new(0.0, grid.derivative_wavenumber(a[ax]));
                }
                z
            })
            .collect();
        for (s, x) in sq.iter_mut().zip(tr.inverse_samples(&coeffs)) {
            let x = x * scale;
            *s += x * x;
        }
    }
    let mag: Vec<f64> = sq.into_iter().map(libm::sqrt).collect();
    lp_norm_samples(&grid, &mag, p)
}

/// Measured scaling of `‖D^n k_t‖_{L^p}` against `t^{−(d/4)(1−1/p) − n/4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelScalingReport {
    pub d: usize,
    pub n: u32,
    #[serde(with = "crate::exponent_serde")]
    pub p: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub fitted_slope: f64,
    pub theoretical_slope: f64,
    pub max_residual: f64,
}

impl KernelScalingReport {
    pub fn slope_error(&self) -> f64 {
        (self.fitted_slope - self.theoretical_slope).abs()
    }
}

pub fn theoretical_kernel_slope(d: usize, order: u32, p: f64) -> f64 {
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    -(d as f64 / 4.0) * (1.0 - inv_p) - order as f64 / 4.0
}

pub fn verify_kernel_scaling(grid: GridSpec, order: u32, p: f64, times: &[f64]) -> Result<KernelScalingReport> {
    if times.len() < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: times.len() });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
        return Err(Error::InvalidArgument("times must be positive and strictly increasing".into()));
    }
    if times[times.len() - 1] < 10.0 * times[0] {
        return Err(Error::InvalidArgument("times must span at least one decade".into()));
    }
    let norms = times
        .iter()
        .map(|&t| kernel_derivative_norm(t, grid, order, p))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_loglog(times, &norms)?;
    Ok(KernelScalingReport {
        d: grid.dim(),
        n: order,
        p,
        times: times.to_vec(),
        norms,
        fitted_slope: fit.slope,
        theoretical_slope: theoretical_kernel_slope(grid.dim(), order, p),
        max_residual: fit.max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::lp_norm;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    // mpmath, 50 digits
    const PHI1_M1: f64 = 0.632_120_558_828_557_7;
    const PHI1_M1E6: f64 = 0.999_999_500_000_166_7;
    const PHI2_M1E6: f64 = 0.499_999_833_333_375;
    const PHI2_M03: f64 = 0.453_535_785_352_420_7;
    const PHI2_M2: f64 = 0.283_833_820_809_153_2;
    // Γ(5/4)/π
    const K1_AT_ZERO: f64 = 0.288_516_869_308_234_8;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi1(0.0), 1.0);
        assert!(rel(phi1(-1.0), PHI1_M1) < 1e-12);
        assert!(rel(phi1(-1e-6), PHI1_M1E6) < 1e-12);
        assert_eq!(phi2(0.0), 0.5);
        assert!(rel(phi2(-1e-6), PHI2_M1E6) < 1e-12);
        assert!(rel(phi2(-0.3), PHI2_M03) < 1e-12);
        assert!(rel(phi2(-2.0), PHI2_M2) < 1e-12);
        assert_eq!(phi1(f64::NEG_INFINITY), 0.0);
        assert!(rel(phi1(-1e12), 1e-12) < 1e-12);
    }

    #[test]
    fn phi1_branches_agree_at_threshold() {
        for z in [-1.0001e-3, -0.9999e-3, 0.9999e-3, 1.0001e-3] {
            let direct = libm::expm1(z) / z;
            assert!(rel(phi1(z), direct) < 1e-14);
        }
    }

    #[test]
    fn phi1_multiplier_is_one_at_zero_mode() {
        let g = GridSpec::new(2, 16, 4.0).unwrap();
        let m = Multiplier::phi1(g, 0.5).unwrap();
        assert_eq!(m.weights()[0], 1.0);
        assert!(Multiplier::phi1(g, 0.0).is_err());
    }

    #[test]
    fn semigroup_identity_and_single_mode() {
        let l = 2.0 * PI;
        let g = GridSpec::new(1, 32, l).unwrap();
        let f = Field::from_fn(g, |x| libm::sin(3.0 * x[0]) + 0.2).unwrap();
        assert_eq!(apply_semigroup(&f, 0.0).unwrap(), f.forward().inverse().unwrap());
        assert_eq!(apply_semigroup(&f, -1.0), Err(Error::NegativeTime(-1.0)));

        let t = 0.01;
        let out = apply_semigroup(&f, t).unwrap().forward();
        let inp = f.forward();
        for (j, (a, b)) in out.coeffs().iter().zip(inp.coeffs()).enumerate() {
            let k = g.wavenumber(j);
            let expect = b * libm::exp(-t * k * k * k * k);
            assert!((a - expect).norm() < 1e-12, "mode {j}");
        }
        assert_eq!(out.coeffs()[0], inp.coeffs()[0]);
    }

    #[test]
    fn semigroup_composes() {
        let g = GridSpec::new(2, 32, 8.0).unwrap();
        let f = Field::from_fn(g, |x| libm::exp(-(x[0] * x[0] + 2.0 * x[1] * x[1]))).unwrap();
        let a = apply_semigroup(&apply_semigroup(&f, 0.03).unwrap(), 0.05).unwrap();
        let b = apply_semigroup(&f, 0.08).unwrap();
        let d = lp_norm(&a.sub(&b).unwrap(), 2.0).unwrap();
        assert!(d <= 1e-13 * lp_norm(&b, 2.0).unwrap());
    }

    #[test]
    fn kernel_value_at_origin_and_mass() {
        let g = GridSpec::new(1, 512, 80.0).unwrap();
        let k = kernel_physical(1.0, g).unwrap();
        assert!((k.samples()[256] - K1_AT_ZERO).abs() < 1e-6);
        let mass = k.samples().iter().sum::<f64>() * g.cell_volume();
        assert!((mass - 1.0).abs() < 1e-10);
        // the biharmonic kernel is not positive
        assert!(k.samples().iter().cloned().fold(f64::INFINITY, f64::min) < 0.0);
    }

    #[test]
    fn kernel_self_similarity() {
        let n = 256;
        let g1 = GridSpec::new(1, n, 80.0).unwrap();
        let g16 = GridSpec::new(1, n, 160.0).unwrap();
        let k1 = kernel_physical(1.0, g1).unwrap();
        let k16 = kernel_physical(16.0, g16).unwrap();
        let peak = k1.max_abs();
        for j in 0..n {
            assert!((k16.samples()[j] - 0.5 * k1.samples()[j]).abs() < 1e-8 * peak);
        }
    }

    #[test]
    fn unresolved_kernel_is_rejected() {
        let g = GridSpec::new(1, 64, 10.0).unwrap();
        // far too wide for the box
        assert!(matches!(kernel_physical(1e3, g), Err(Error::UnresolvedKernel { .. })));
        // far too narrow for the grid
        assert!(matches!(kernel_physical(1e-6, g), Err(Error::UnresolvedKernel { .. })));
    }

    fn decade(t0: f64) -> Vec<f64> {
        (0..6).map(|i| t0 * libm::pow(10.0, i as f64 / 5.0)).collect()
    }

    #[test]
    fn scaling_sup_norm_1d() {
        let g = GridSpec::new(1, 256, 128.0).unwrap();
        let r = verify_kernel_scaling(g, 0, f64::INFINITY, &decade(1.0)).unwrap();
        assert_eq!(r.theoretical_slope, -0.25);
        assert!(r.slope_error() < 0.01, "{r:?}");
    }

    #[test]
    fn scaling_l1_is_flat_and_mass_preserving() {
        let g = GridSpec::new(1, 256, 128.0).unwrap();
        let r = verify_kernel_scaling(g, 0, 1.0, &decade(1.0)).unwrap();
        assert_eq!(r.theoretical_slope, 0.0);
        assert!(r.fitted_slope.abs() < 0.01, "{r:?}");
        // sign changes push the L1 norm above the unit mass; ‖k_1‖_{L¹} ≈ 1.236966 (mpmath)
        for v in &r.norms {
            assert!((*v - 1.236_966).abs() < 3e-3, "{v}");
        }
        for &t in &r.times {
            let k = kernel_physical(t, g).unwrap();
            let mass = k.samples().iter().sum::<f64>() * g.cell_volume();
            assert!((mass - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn scaling_gradient_l1_2d() {
        let g = GridSpec::new(2, 256, 128.0).unwrap();
        let r = verify_kernel_scaling(g, 1, 1.0, &decade(1.0)).unwrap();
        assert_eq!(r.theoretical_slope, -0.25);
        assert!(r.slope_error() < 0.01, "{r:?}");
    }

    #[test]
    fn scaling_rejects_bad_time_lists() {
        let g = GridSpec::new(1, 64, 30.0).unwrap();
        assert!(verify_kernel_scaling(g, 0, 1.0, &[1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(verify_kernel_scaling(g, 0, 1.0, &[1.0, 2.0, 3.0, 4.0, 5.0]).is_err());
        assert!(verify_kernel_scaling(g, 0, 1.0, &[1.0, 3.0, 2.0, 4.0, 20.0]).is_err());
    }

    proptest! {
        #[test]
        fn contraction_and_mean(t in 0.0f64..2.0, seed in any::<u64>()) {
            let g = GridSpec::new(1, 32, 5.0).unwrap();
            let mut s = seed | 1;
            let f = Field::from_fn(g, |_| {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.3
            }).unwrap();
            let out = apply_semigroup(&f, t).unwrap();
            prop_assert!(lp_norm(&out, 2.0).unwrap() <= lp_norm(&f, 2.0).unwrap() * (1.0 + 1e-14));
            let a = f.forward().coeffs()[0];
            let b = out.forward().coeffs()[0];
            prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }

        #[test]
        fn multiplier_monotone(t1 in 0.0f64..1.0, dt in 0.0f64..1.0) {
            let g = GridSpec::new(2, 16, 6.0).unwrap();
            let a = Multiplier::semigroup(g, t1).unwrap();
            let b = Multiplier::semigroup(g, t1 + dt).unwrap();
            for i in 0..g.len() {
                prop_assert!(b.weights()[i] <= a.weights()[i]);
                prop_assert!(a.weights()[i] <= 1.0 && a.weights()[i] >= 0.0);
            }
            prop_assert_eq!(a.weights()[0], 1.0);
        }
    }
}
