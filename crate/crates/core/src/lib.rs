//! Numerical toolkit for the inverse boundary value problem of the relativistic
//! Schrödinger equation
//!
//! `L u = (−i∂_t + A₀)² u − Σ_j (−i∂_{x_j} + A_j)² u + V u = 0`
//!
//! on `ℝ × Ω`: light-ray transforms of potentials, Fourier-slice analysis,
//! gauge recovery, divergence-constrained spectral reconstruction with its
//! logarithmic stability bound, an explicit hyperbolic solver producing
//! Dirichlet-to-Neumann data, and obstacle/winding geometry.

pub mod catalog;
pub mod experiment;
pub mod error;
pub mod field;
pub mod gauge;
pub mod grid;
pub mod interp;
pub mod obstacles;
pub mod ray;
pub mod sim;
pub mod slice;
pub mod spectral;
pub mod stpf;
pub mod stability;
pub mod tomography;

pub use error::{Error, Result};
