//! Discrete weighted harmonic analysis on ℝⁿ and reflected half-spaces.
//!
//! Grid functions live on cell-centered grids over `[-L, L]ⁿ` (n ∈ {1, 2}).
//! Integrals are exact cell sums. The closed-form kernels are generic over
//! [`scalar::Real`]; the discrete machinery works in `f64`.

pub mod atoms;
pub mod bmo;
pub mod dyadic;
pub mod error;
pub mod fft;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod operators;
pub mod scalar;
pub mod sparse;
pub mod squarefn;
pub mod testfns;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{CellBox, Domain, Grid, GridFunction, Side};
pub use weights::Weight;

pub type KernelSpecF64 = kernels::KernelSpec<f64>;
pub type KernelSpecF32 = kernels::KernelSpec<f32>;
