//! Spectral differentiation, discrete Lebesgue norms and dealiasing.

use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Spectrum, Transform, VectorField};
use crate::grid::GridSpec;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `(i k_j) f̂` for each axis `j`.
pub fn gradient_spectra(s: &Spectrum) -> Vec<Spectrum> {
    let grid = *s.grid();
    (0..grid.dim())
        .map(|axis| {
            let coeffs = s
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| I * grid.derivative_wavenumber(grid.axes(i)[axis]) * c)
                .collect();
            Spectrum::new(grid, coeffs).expect("same grid")
        })
        .collect()
}

/// `Σ_j (i k_j) v̂_j`; the zero mode is exactly zero.
pub fn divergence_spectrum(components: &[Spectrum]) -> Result<Spectrum> {
    let grid = *components.first().ok_or(Error::InvalidArgument("no components".into()))?.grid();
    if components.len() != grid.dim() || components.iter().any(|c| *c.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let mut out = Spectrum::zeros(grid);
    for (axis, comp) in components.iter().enumerate() {
        for (i, (o, c)) in out.coeffs_mut().iter_mut().zip(comp.coeffs()).enumerate() {
            *o += I * grid.derivative_wavenumber(grid.axes(i)[axis]) * c;
        }
    }
    out.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
    Ok(out)
}

pub fn spectral_gradient(f: &Field) -> Result<VectorField> {
    if let Some(index) = f.samples().iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let t = Transform::new(*f.grid());
    let comps = gradient_spectra(&t.forward(f))
        .iter()
        .map(|s| t.inverse(s))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(comps)
}

pub fn spectral_divergence(v: &VectorField) -> Result<Field> {
    let t = Transform::new(*v.grid());
    let spectra: Vec<Spectrum> = v.components().iter().map(|c| t.forward(c)).collect();
    t.inverse(&divergence_spectrum(&spectra)?)
}

/// `|k|^{2·power}` multiplier with the even (signed) Nyquist wavenumber.
pub fn wavenumber_power(grid: &GridSpec, exponent: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let k2 = grid.wavevector_norm_sq(i);
            if k2 == 0.0 {
                if exponent == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                libm::pow(k2, 0.5 * exponent)
            }
        })
        .collect()
}

/// Δ²f via the `|k|⁴` multiplier.
pub fn biharmonic(f: &Field) -> Result<Field> {
    let w = wavenumber_power(f.grid(), 4.0);
    f.forward().multiply(&w).inverse()
}

/// Δf via the `−|k|²` multiplier.
pub fn laplacian(f: &Field) -> Result<Field> {
    let w: Vec<f64> = wavenumber_power(f.grid(), 2.0).into_iter().map(|x| -x).collect();
    f.forward().multiply(&w).inverse()
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// Midpoint-rule `L^p` norm of raw samples; `p = ∞` gives the grid maximum.
pub fn lp_norm_samples(grid: &GridSpec, samples: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    let max = samples.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if p.is_infinite() {
        return Ok(max);
    }
    if max == 0.0 {
        return Ok(0.0);
    }
    // scale by the maximum so large p cannot overflow
    let sum: f64 = if p == 1.0 {
        samples.iter().map(|x| x.abs() / max).sum()
    } else if p == 2.0 {
        samples.iter().map(|x| (x / max) * (x / max)).sum()
    } else {
        samples.iter().map(|x| libm::pow(x.abs() / max, p)).sum()
    };
    Ok(max * libm::pow(sum * grid.cell_volume(), 1.0 / p))
}

pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    lp_norm_samples(f.grid(), f.samples(), p)
}

/// `‖ |v| ‖_{L^p}` with the pointwise Euclidean magnitude.
pub fn vector_lp_norm(v: &VectorField, p: f64) -> Result<f64> {
    lp_norm(&v.magnitude(), p)
}

/// `‖f‖_{L^p} + ‖∇f‖_{L^p}`.
pub fn w1p_norm(f: &Field, p: f64) -> Result<f64> {
    Ok(lp_norm(f, p)? + vector_lp_norm(&spectral_gradient(f)?, p)?)
}

/// Discrete `W^{1,p} ∩ W^{1,∞}` norm, the sum of both Sobolev norms.
pub fn w1p_w1inf_norm(f: &Field, p: f64) -> Result<f64> {
    let g = spectral_gradient(f)?.magnitude();
    Ok(lp_norm(f, p)? + lp_norm(&g, p)? + f.max_abs() + g.max_abs())
}

/// Two-thirds rule: zero every coefficient with some `|m| > N/3`.
pub fn dealias(s: &Spectrum) -> Spectrum {
    let mut out = s.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(s: &mut Spectrum) {
    let grid = *s.grid();
    let n = grid.n() as u64;
    for (i, c) in s.coeffs_mut().iter_mut().enumerate() {
        if 3 * grid.max_mode(i) > n {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// Fraction of spectral energy in the top octave (some `|m| > N/4`).
pub fn tail_fraction(s: &Spectrum) -> f64 {
    let grid = *s.grid();
    let n = grid.n() as u64;
    let mut tail = 0.0;
    let mut total = 0.0;
    for (i, c) in s.coeffs().iter().enumerate() {
        let e = c.norm_sqr();
        total += e;
        if 4 * grid.max_mode(i) > n {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Largest `|f|` over the outer `N/16` samples of each axis.
pub fn boundary_shell_max(f: &Field) -> f64 {
    let grid = f.grid();
    f.samples()
        .iter()
        .enumerate()
        .filter(|(i, _)| grid.in_boundary_shell(*i))
        .fold(0.0, |m: f64, (_, x)| m.max(x.abs()))
}

/// Norms of one snapshot at the exponents `{1, p, 2, pq, ∞}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub t: f64,
    pub entries: Vec<NormEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    #[serde(with = "crate::exponent_serde")]
    pub p: f64,
    /// `‖u‖_{L^p}`.
    pub lp: f64,
    /// `‖u‖_{L^p} + ‖∇u‖_{L^p}`.
    pub w1p: f64,
}

impl NormReport {
    pub fn compute(f: &Field, t: f64, p_model: f64, q: f64) -> Result<Self> {
        let g = spectral_gradient(f)?.magnitude();
        let mut exps: Vec<f64> = alloc::vec![1.0, p_model, 2.0, p_model * q, f64::INFINITY];
        exps.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        exps.dedup();
        let entries = exps
            .into_iter()
            .map(|p| {
                let lp = lp_norm(f, p)?;
                Ok(NormEntry { p, lp, w1p: lp + lp_norm(&g, p)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { t, entries })
    }

    pub fn get(&self, p: f64) -> Option<&NormEntry> {
        self.entries.iter().find(|e| e.p == p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Spectrum;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn grid1(n: usize, l: f64) -> GridSpec {
        GridSpec::new(1, n, l).unwrap()
    }

    fn max_err(a: &Field, b: &Field) -> f64 {
        a.samples().iter().zip(b.samples()).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn gradient_of_sine_is_exact() {
        let l = 3.7;
        let g = grid1(64, l);
        let w = 2.0 * PI / l;
        let f = Field::from_fn(g, |x| libm::sin(w * x[0])).unwrap();
        let df = spectral_gradient(&f).unwrap();
        let exact = Field::from_fn(g, |x| w * libm::cos(w * x[0])).unwrap();
        assert!(max_err(&df.components()[0], &exact) < 1e-10);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = GridSpec::new(2, 16, 2.0).unwrap();
        let df = spectral_gradient(&Field::constant(g, 4.2)).unwrap();
        for c in df.components() {
            assert!(c.max_abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_is_linear() {
        let l = 5.0;
        let g = grid1(32, l);
        let w = 2.0 * PI / l;
        let f = Field::from_fn(g, |x| libm::sin(2.0 * w * x[0]) + libm::cos(w * x[0])).unwrap();
        let exact =
            Field::from_fn(g, |x| 2.0 * w * libm::cos(2.0 * w * x[0]) - w * libm::sin(w * x[0])).unwrap();
        assert!(max_err(&spectral_gradient(&f).unwrap().components()[0], &exact) < 1e-10);
    }

    fn band_limited_2d(g: GridSpec) -> Field {
        let w = 2.0 * PI / g.length();
        Field::from_fn(g, |x| {
            libm::sin(w * x[0]) * libm::cos(2.0 * w * x[1]) + 0.3 * libm::cos(3.0 * w * (x[0] + x[1]))
        })
        .unwrap()
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let g = GridSpec::new(2, 32, 6.0).unwrap();
        let f = band_limited_2d(g);
        let lhs = spectral_divergence(&spectral_gradient(&f).unwrap()).unwrap();
        let rhs = laplacian(&f).unwrap();
        assert!(max_err(&lhs, &rhs) < 1e-10 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn div_grad_twice_is_biharmonic() {
        let g = GridSpec::new(2, 32, 6.0).unwrap();
        let f = band_limited_2d(g);
        let lap = spectral_divergence(&spectral_gradient(&f).unwrap()).unwrap();
        let bih = spectral_divergence(&spectral_gradient(&lap).unwrap()).unwrap();
        let rhs = biharmonic(&f).unwrap();
        assert!(max_err(&bih, &rhs) < 1e-10 * rhs.max_abs());
    }

    #[test]
    fn divergence_of_constant_and_zero_mode_vanish() {
        let g = GridSpec::new(2, 16, 1.0).unwrap();
        let v = VectorField::new(alloc::vec![Field::constant(g, 1.0), Field::constant(g, -3.0)]).unwrap();
        let div = spectral_divergence(&v).unwrap();
        assert!(div.max_abs() < 1e-14);
        let s = divergence_spectrum(&[Field::constant(g, 2.0).forward(), Field::zeros(g).forward()]).unwrap();
        assert_eq!(s.coeffs()[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn divergence_rejects_mixed_grids() {
        let a = Field::zeros(GridSpec::new(2, 16, 1.0).unwrap()).forward();
        let b = Field::zeros(GridSpec::new(2, 16, 2.0).unwrap()).forward();
        assert_eq!(divergence_spectrum(&[a, b]).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn lp_norm_examples() {
        let l = 3.0;
        let g = GridSpec::new(2, 16, l).unwrap();
        for p in [1.0, 1.5, 2.0, 7.0] {
            let n = lp_norm(&Field::constant(g, -2.0), p).unwrap();
            assert!((n - 2.0 * libm::pow(l * l, 1.0 / p)).abs() < 1e-12);
        }
        let f = Field::from_fn(g, |x| x[0] - 0.25 * x[1]).unwrap();
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), f.max_abs());
        assert_eq!(lp_norm(&f, 0.5), Err(Error::InvalidExponent(0.5)));

        let g1 = grid1(64, l);
        let s = Field::from_fn(g1, |x| libm::sin(2.0 * PI * x[0] / l)).unwrap();
        let n2 = lp_norm(&s, 2.0).unwrap();
        assert!((n2 - libm::sqrt(l / 2.0)).abs() < 1e-10 * n2);
    }

    #[test]
    fn dealias_examples() {
        let g = grid1(48usize.next_power_of_two(), 1.0);
        let n = g.n();
        // band-limited to |m| <= N/3: unchanged
        let f = Field::from_fn(g, |x| libm::cos(2.0 * PI * 20.0 * x[0]) + libm::sin(2.0 * PI * 3.0 * x[0])).unwrap();
        let s = f.forward();
        let kept = dealias(&s);
        let mut removed = 0.0;
        for (i, (a, b)) in s.coeffs().iter().zip(kept.coeffs()).enumerate() {
            if 3 * g.max_mode(i) > n as u64 {
                removed += a.norm_sqr();
            } else {
                assert_eq!(a, b);
            }
        }
        assert!(removed < 1e-20 * s.energy());
        // single mode at N/2 - 1 is removed
        let mut top = Spectrum::zeros(g);
        top.coeffs_mut()[n / 2 - 1] = Complex64::new(1.0, -2.0);
        top.coeffs_mut()[n / 2 + 1] = Complex64::new(1.0, 2.0);
        assert_eq!(dealias(&top).energy(), 0.0);
    }

    #[test]
    fn dealias_white_noise_masks_tail_exactly() {
        let g = GridSpec::new(2, 32, 1.0).unwrap();
        let mut s = 0x9E3779B97F4A7C15u64;
        let f = Field::from_fn(g, |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .unwrap();
        let spec = f.forward();
        let kept = dealias(&spec);
        let n = g.n() as u64;
        let mut kept_in = 0.0;
        let mut orig_in = 0.0;
        for (i, (a, b)) in spec.coeffs().iter().zip(kept.coeffs()).enumerate() {
            if 3 * g.max_mode(i) > n {
                assert_eq!(b.norm_sqr(), 0.0);
            } else {
                orig_in += a.norm_sqr();
                kept_in += b.norm_sqr();
            }
        }
        assert_eq!(orig_in, kept_in);
    }

    #[test]
    fn norm_report_orders_sobolev_above_lebesgue() {
        let g = GridSpec::new(2, 32, 10.0).unwrap();
        let f = Field::from_fn(g, |x| libm::exp(-(x[0] * x[0] + x[1] * x[1]))).unwrap();
        let r = NormReport::compute(&f, 0.0, 2.0, 3.0).unwrap();
        assert_eq!(r.entries.len(), 4);
        for e in &r.entries {
            assert!(e.lp >= 0.0 && e.w1p >= e.lp);
        }
        assert!(r.get(f64::INFINITY).is_some());
    }

    proptest! {
        #[test]
        fn homogeneous(c in -50.0f64..50.0, p in prop_oneof![Just(1.0), Just(2.0), 1.0f64..9.0, Just(f64::INFINITY)]) {
            let g = GridSpec::new(1, 32, 2.0).unwrap();
            let f = Field::from_fn(g, |x| libm::sin(3.0 * x[0]) + 0.5 * x[0]).unwrap();
            let lhs = lp_norm(&f.scale(c).unwrap(), p).unwrap();
            let rhs = c.abs() * lp_norm(&f, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs.max(1e-300));
        }

        #[test]
        fn holder_ordering(seed in any::<u64>(), p1 in 1.0f64..6.0, dp in 0.0f64..6.0) {
            let g = GridSpec::new(1, 32, 1.7).unwrap();
            let mut s = seed | 1;
            let f = Field::from_fn(g, |_| {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }).unwrap();
            let vol = g.volume();
            let p2 = p1 + dp;
            let a = lp_norm(&f, p1).unwrap() / libm::pow(vol, 1.0 / p1);
            let b = lp_norm(&f, p2).unwrap() / libm::pow(vol, 1.0 / p2);
            let c = lp_norm(&f, f64::INFINITY).unwrap();
            prop_assert!(a <= b * (1.0 + 1e-12));
            prop_assert!(b <= c * (1.0 + 1e-12));
        }
    }
}
