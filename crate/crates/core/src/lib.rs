//! Pseudo-spectral numerics for growth equations `u_t + Δ²u + ∇·J(∇u) = 0` on a
//! periodic box: spectral calculus, the biharmonic semigroup, surface-current
//! laws, Duhamel/Picard and ETD2 time stepping, integral-inequality checks, and
//! the decay/growth verdicts computed from norm series.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the CLI and
//! threaded scans live in the `mbe` companion crate.
#![no_std]

extern crate alloc;

pub mod bounds;
pub mod currents;
pub mod error;
pub mod exponent_serde;
pub mod fft;
pub mod field;
pub mod grid;
pub mod harness;
pub mod quadrature;
pub mod semigroup;
pub mod solver;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use field::{Field, Spectrum, Transform, VectorField};
pub use grid::GridSpec;
