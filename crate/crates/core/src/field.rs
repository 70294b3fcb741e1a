use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{transform_nd, Radix2Plan};
use crate::grid::GridSpec;

/// Real samples of a scalar function on a [`GridSpec`]. Always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: GridSpec,
    samples: Vec<f64>,
}

/// Complex Fourier coefficients in FFT index order (unnormalised forward DFT).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

/// `d` scalar fields sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<Field>,
}

fn check_finite(samples: &[f64]) -> Result<()> {
    match samples.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

impl Field {
    pub fn new(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::SampleCount { expected: grid.len(), got: samples.len() });
        }
        check_finite(&samples)?;
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, samples: alloc::vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { grid, samples: alloc::vec![value; grid.len()] }
    }

    /// Samples `f` at every grid position (`x[1]` is zero in one dimension).
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([f64; 2]) -> f64) -> Result<Self> {
        let samples = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self::new(grid, samples)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Discrete mean `(1/N^d) Σ f_i`.
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(self.grid, self.samples.iter().map(|x| c * x).collect())
    }

    pub fn add(&self, other: &Field) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| f(*a, *b)).collect();
        Self::new(self.grid, samples)
    }

    pub fn forward(&self) -> Spectrum {
        Transform::new(self.grid).forward(self)
    }
}

impl Spectrum {
    pub fn new(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::SampleCount { expected: grid.len(), got: coeffs.len() });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, coeffs: alloc::vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Pointwise product with a real weight per wavevector.
    pub fn multiply(&self, weights: &[f64]) -> Spectrum {
        debug_assert_eq!(weights.len(), self.coeffs.len());
        let coeffs = self.coeffs.iter().zip(weights).map(|(c, w)| c * w).collect();
        Spectrum { grid: self.grid, coeffs }
    }

    /// Total spectral energy `Σ|f̂_k|²`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn inverse(&self) -> Result<Field> {
        Transform::new(self.grid).inverse(self)
    }
}

impl VectorField {
    pub fn new(components: Vec<Field>) -> Result<Self> {
        let first = components.first().ok_or(Error::InvalidArgument("empty vector field".into()))?;
        if components.len() != first.grid.dim() {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} components on a {}-dimensional grid",
                components.len(),
                first.grid.dim()
            )));
        }
        if components.iter().any(|c| c.grid != first.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { components })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.components[0].grid
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Field> {
        self.components
    }

    /// Vector at one sample, unused axes zero.
    pub fn at(&self, i: usize) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (slot, c) in v.iter_mut().zip(&self.components) {
            *slot = c.samples[i];
        }
        v
    }

    /// Pointwise Euclidean magnitude `|v(x)|`.
    pub fn magnitude(&self) -> Field {
        let grid = *self.grid();
        let samples = (0..grid.len())
            .map(|i| {
                let v = self.at(i);
                libm::hypot(v[0], v[1])
            })
            .collect();
        Field { grid, samples }
    }
}

/// A reusable forward/inverse transform for one grid.
#[derive(Debug, Clone)]
pub struct Transform {
    grid: GridSpec,
    plan: Radix2Plan,
}

impl Transform {
    pub fn new(grid: GridSpec) -> Self {
        Self { grid, plan: Radix2Plan::new(grid.n()) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn forward(&self, f: &Field) -> Spectrum {
        self.forward_samples(&f.samples)
    }

    pub(crate) fn forward_samples(&self, samples: &[f64]) -> Spectrum {
        let mut coeffs: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        transform_nd(&self.plan, self.grid.dim(), &mut coeffs, false);
        Spectrum { grid: self.grid, coeffs }
    }

    /// Real part of the inverse transform.
    pub fn inverse(&self, s: &Spectrum) -> Result<Field> {
        if s.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        Field::new(self.grid, self.inverse_samples(&s.coeffs))
    }

    pub(crate) fn inverse_samples(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        transform_nd(&self.plan, self.grid.dim(), &mut buf, true);
        buf.into_iter().map(|c| c.re).collect()
    }
}
