//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by grid construction, field operations, transforms,
/// simulations, geometry and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A grid failed validation (dimension, sample count, spacing).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two objects that must share a grid or dimension do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A closed-form field is too narrow for the sampling grid.
    #[error("under-resolved input: {0}")]
    Resolution(String),

    /// A parameter is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A gauge function does not vanish on the lateral boundary.
    #[error("gauge function is {max_boundary:.3e} on the lateral boundary (tolerance {tol:.3e})")]
    GaugeBoundary { max_boundary: f64, tol: f64 },

    /// A ray leaves the sampled window while the integrand is still significant.
    #[error("ray leaves the grid with integrand {tail:.3e} above tolerance {tol:.3e}")]
    Truncation { tail: f64, tol: f64 },

    /// Probe rays show that the input is not a pure gauge.
    #[error("not a pure gauge: max probe ray transform {max_ray:.3e} exceeds {tol:.3e}")]
    NotAGauge { max_ray: f64, tol: f64 },

    /// A frequency point lies in the light cone or at the origin.
    #[error("frequency point outside the admissible region: {0}")]
    ConeRegion(String),

    /// A linear system is too close to singular.
    #[error("ill-conditioned system: |det| = {det:.3e} below floor {floor:.3e}")]
    Conditioning { det: f64, floor: f64 },

    /// The time step violates the Courant limit.
    #[error("CFL violation: dt = {dt:.3e} exceeds {limit:.3e}")]
    Cfl { dt: f64, limit: f64 },

    /// The explicit solver produced non-finite values.
    #[error("solver diverged at time step {step}")]
    Diverged { step: usize },

    /// The sup-norm bound chain is used outside its regime.
    #[error("stability regime violated: {0}")]
    Regime(String),

    /// Obstacle geometry failure (point inside obstacle, no loop, blocked path).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A vector potential is not flat along a loop.
    #[error("field is not flat along the loop: max curl {max_curl:.3e} exceeds {tol:.3e}")]
    NotFlat { max_curl: f64, tol: f64 },

    /// Malformed STPF or configuration content.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
