use alloc::format;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic cube `[-L/2, L/2)^d` sampled with `N` points per axis.
///
/// Samples are stored row-major (axis 0 slowest). Sample `j` on an axis sits at
/// `x_j = j·h − L/2`; FFT index `j` carries the integer mode `m = j` for
/// `j < N/2` and `m = j − N` otherwise, with wavenumber `k = 2πm/L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridDef", into = "GridDef")]
pub struct GridSpec {
    dim: usize,
    n: usize,
    length: f64,
}

#[derive(Serialize, Deserialize)]
struct GridDef {
    dim: usize,
    n: usize,
    length: f64,
}

impl TryFrom<GridDef> for GridSpec {
    type Error = Error;
    fn try_from(d: GridDef) -> Result<Self> {
        GridSpec::new(d.dim, d.n, d.length)
    }
}

impl From<GridSpec> for GridDef {
    fn from(g: GridSpec) -> Self {
        GridDef { dim: g.dim, n: g.n, length: g.length }
    }
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("{n} points per axis: need a power of two >= 8")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length {length} must be positive")));
        }
        Ok(Self { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Total number of samples, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        libm::pow(self.spacing(), self.dim as f64)
    }

    pub fn volume(&self) -> f64 {
        libm::pow(self.length, self.dim as f64)
    }

    /// Integer mode `m ∈ {−N/2, …, N/2−1}` of an axis index.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Wavenumber `2πm/L` of an axis index.
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * self.mode(j) as f64 / self.length
    }

    /// Wavenumber used for odd-order derivatives: the unpaired Nyquist mode maps to zero.
    pub fn derivative_wavenumber(&self, j: usize) -> f64 {
        if j == self.n / 2 {
            0.0
        } else {
            self.wavenumber(j)
        }
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        j as f64 * self.spacing() - 0.5 * self.length
    }

    /// Per-axis indices of a flat index; unused axes are zero.
    pub fn axes(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.n, flat % self.n],
        }
    }

    pub fn flat(&self, axes: [usize; 2]) -> usize {
        match self.dim {
            1 => axes[0],
            _ => axes[0] * self.n + axes[1],
        }
    }

    /// Physical position of a flat index; unused axes are zero.
    pub fn position(&self, flat: usize) -> [f64; 2] {
        let a = self.axes(flat);
        let mut x = [0.0; 2];
        for (axis, xi) in x.iter_mut().enumerate().take(self.dim) {
            *xi = self.coordinate(a[axis]);
        }
        x
    }

    /// Wavevector of a flat spectral index.
    pub fn wavevector(&self, flat: usize) -> [f64; 2] {
        let a = self.axes(flat);
        let mut k = [0.0; 2];
        for (axis, ki) in k.iter_mut().enumerate().take(self.dim) {
            *ki = self.wavenumber(a[axis]);
        }
        k
    }

    pub fn wavevector_norm_sq(&self, flat: usize) -> f64 {
        let k = self.wavevector(flat);
        k[0] * k[0] + k[1] * k[1]
    }

    /// Largest `|m|` over the axes of a flat spectral index.
    pub fn max_mode(&self, flat: usize) -> u64 {
        let a = self.axes(flat);
        (0..self.dim).map(|ax| self.mode(a[ax]).unsigned_abs()).max().unwrap_or(0)
    }

    /// True if the flat index lies in the outer `N/16` samples of any axis.
    pub fn in_boundary_shell(&self, flat: usize) -> bool {
        let w = (self.n / 16).max(1);
        let a = self.axes(flat);
        (0..self.dim).any(|ax| a[ax] < w || a[ax] >= self.n - w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(3, 16, 1.0).is_err());
        assert!(GridSpec::new(1, 4, 1.0).is_err());
        assert!(GridSpec::new(1, 24, 1.0).is_err());
        assert!(GridSpec::new(2, 16, 0.0).is_err());
        assert!(GridSpec::new(2, 16, f64::NAN).is_err());
    }

    #[test]
    fn modes_cover_symmetric_range() {
        let g = GridSpec::new(1, 8, 2.0 * PI).unwrap();
        let modes: alloc::vec::Vec<i64> = (0..8).map(|j| g.mode(j)).collect();
        assert_eq!(modes, [0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.wavenumber(3), 3.0);
        assert_eq!(g.derivative_wavenumber(4), 0.0);
        assert!(g.cell_volume() > 0.0);
    }

    #[test]
    fn flat_roundtrip_2d() {
        let g = GridSpec::new(2, 16, 1.0).unwrap();
        for f in 0..g.len() {
            assert_eq!(g.flat(g.axes(f)), f);
        }
        assert_eq!(g.coordinate(8), 0.0);
    }
}
