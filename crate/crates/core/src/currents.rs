//! Surface-diffusion current laws `J(∇u)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, VectorField};

/// Smallest admissible `|denominator|` for [`CurrentModel::ComponentRational`].
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurrentModel {
    /// `J(v) = (1 − |v|²) v`, declared growth exponent 3.
    RostKrug,
    /// `J(v) = c |v|^{q−1} v`. `c = 0` gives the linear problem.
    PowerLaw {
        q: f64,
        #[serde(default = "one")]
        coefficient: f64,
    },
    /// `J(v) = (v_x f(v_x), v_y f(v_y))` with `f = numer/denom`, coefficients in
    /// ascending powers. `q` is the declared asymptotic degree.
    ComponentRational { numer: Vec<f64>, denom: Vec<f64>, q: f64 },
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl CurrentModel {
    pub fn power_law(q: f64) -> Self {
        CurrentModel::PowerLaw { q, coefficient: 1.0 }
    }

    /// The zero current with a declared exponent (fixes `p = d(q−1)/2`).
    pub fn linear(q: f64) -> Self {
        CurrentModel::PowerLaw { q, coefficient: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CurrentModel::RostKrug => Ok(()),
            CurrentModel::PowerLaw { q, coefficient } => {
                if !(*q > 1.0) || !q.is_finite() || !coefficient.is_finite() {
                    return Err(Error::InvalidArgument(alloc::format!("power law needs finite q > 1, got {q}")));
                }
                Ok(())
            }
            CurrentModel::ComponentRational { numer, denom, q } => {
                if denom.is_empty() || numer.is_empty() {
                    return Err(Error::InvalidArgument("rational current needs numerator and denominator".into()));
                }
                if !(*q >= 1.0) || numer.iter().chain(denom).any(|c| !c.is_finite()) {
                    return Err(Error::InvalidArgument("rational current needs finite coefficients and q >= 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Declared growth exponent `q` of `J = O(|v|^q)`.
    pub fn q(&self) -> f64 {
        match self {
            CurrentModel::RostKrug => 3.0,
            CurrentModel::PowerLaw { q, .. } => *q,
            CurrentModel::ComponentRational { q, .. } => *q,
        }
    }

    /// True when `J ≡ 0`.
    pub fn is_zero(&self) -> bool {
        matches!(self, CurrentModel::PowerLaw { coefficient, .. } if *coefficient == 0.0)
    }

    /// `J(v)` at one point. Rational models report the denominators through `Err(value)`.
    pub(crate) fn eval_point(&self, v: [f64; 2], dim: usize) -> core::result::Result<[f64; 2], f64> {
        match self {
            CurrentModel::RostKrug => {
                let s = 1.0 - (v[0] * v[0] + v[1] * v[1]);
                Ok([s * v[0], s * v[1]])
            }
            CurrentModel::PowerLaw { q, coefficient } => {
                let r = libm::hypot(v[0], v[1]);
                if r == 0.0 || *coefficient == 0.0 {
                    return Ok([0.0, 0.0]);
                }
                let s = coefficient * libm::pow(r, q - 1.0);
                Ok([s * v[0], s * v[1]])
            }
            CurrentModel::ComponentRational { numer, denom, .. } => {
                let mut out = [0.0; 2];
                for (o, &x) in out.iter_mut().zip(&v[..dim]) {
                    let den = horner(denom, x);
                    if den.abs() <= DENOMINATOR_FLOOR {
                        return Err(den);
                    }
                    *o = x * horner(numer, x) / den;
                }
                Ok(out)
            }
        }
    }

    /// `J(v)` for a planar gradient vector.
    pub fn eval(&self, v: [f64; 2]) -> Result<[f64; 2]> {
        self.eval_point(v, 2).map_err(|value| Error::DenominatorUnderflow { index: 0, value })
    }
}

/// Applies `J` at every grid sample of a gradient field.
pub fn evaluate_current(model: &CurrentModel, g: &VectorField) -> Result<VectorField> {
    let grid = *g.grid();
    let d = grid.dim();
    let n = grid.len();
    let mut comps: Vec<Vec<f64>> = (0..d).map(|_| Vec::with_capacity(n)).collect();
    let mut worst: Option<(usize, f64)> = None;
    for i in 0..n {
        let v = g.at(i);
        match model.eval_point(v, d) {
            Ok(j) => {
                for (axis, c) in comps.iter_mut().enumerate() {
                    if !j[axis].is_finite() {
                        return Err(Error::NonFiniteCurrent { index: i });
                    }
                    c.push(j[axis]);
                }
            }
            Err(_) => {
                for c in comps.iter_mut() {
                    c.push(0.0);
                }
                // locate the smallest denominator over the whole field
                if let CurrentModel::ComponentRational { denom, .. } = model {
                    let m = v[..d].iter().map(|x| horner(denom, *x)).fold(f64::INFINITY, |a, b| {
                        if b.abs() < a.abs() {
                            b
                        } else {
                            a
                        }
                    });
                    if worst.is_none_or(|(_, w)| m.abs() < w.abs()) {
                        worst = Some((i, m));
                    }
                }
            }
        }
    }
    if let Some((index, value)) = worst {
        return Err(Error::DenominatorUnderflow { index, value });
    }
    VectorField::new(comps.into_iter().map(|c| Field::new(grid, c)).collect::<Result<Vec<_>>>()?)
}

/// Number of radii and directions in the [`growth_check`] sample.
const GROWTH_RINGS: usize = 100;
const GROWTH_DIRECTIONS: usize = 100;

/// The deterministic `10⁴`-point disk sample used by [`growth_check`]:
/// area-uniform ring radii `r·sqrt((i+½)/100)` with golden-angle offsets.
pub fn growth_sample(radius: f64) -> impl Iterator<Item = [f64; 2]> {
    let golden = PI * (3.0 - libm::sqrt(5.0));
    (0..GROWTH_RINGS).flat_map(move |i| {
        let s = radius * libm::sqrt((i as f64 + 0.5) / GROWTH_RINGS as f64);
        (0..GROWTH_DIRECTIONS).map(move |j| {
            let a = 2.0 * PI * j as f64 / GROWTH_DIRECTIONS as f64 + golden * i as f64;
            [s * libm::cos(a), s * libm::sin(a)]
        })
    })
}

/// `sup |J(v)|/|v|^q` over [`growth_sample`] of the disk `|v| ≤ r`.
pub fn growth_check(model: &CurrentModel, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("radius must be positive, got {radius}")));
    }
    let q = model.q();
    let mut sup = 0.0f64;
    for v in growth_sample(radius) {
        let j = model.eval(v)?;
        let ratio = libm::hypot(j[0], j[1]) / libm::pow(libm::hypot(v[0], v[1]), q);
        if !ratio.is_finite() {
            return Err(Error::NonFiniteCurrent { index: 0 });
        }
        sup = sup.max(ratio);
    }
    Ok(sup)
}

/// Largest observed `|J(v) − J(w)| / |v − w|` over seeded random pairs in the disk `|v|, |w| ≤ R`.
pub fn lipschitz_estimate(model: &CurrentModel, radius: f64, pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let point = |u: &mut dyn FnMut() -> f64| {
        let s = radius * libm::sqrt(u());
        let a = 2.0 * PI * u();
        [s * libm::cos(a), s * libm::sin(a)]
    };
    let mut sup = 0.0f64;
    for _ in 0..pairs {
        let v = point(&mut unit);
        let w = point(&mut unit);
        let dist = libm::hypot(v[0] - w[0], v[1] - w[1]);
        if dist == 0.0 {
            continue;
        }
        let (jv, jw) = (model.eval(v)?, model.eval(w)?);
        sup = sup.max(libm::hypot(jv[0] - jw[0], jv[1] - jw[1]) / dist);
    }
    Ok(sup)
}
