//! Sampled fields on a [`SpaceTimeGrid`] and the grid operators acting on them:
//! finite-difference derivatives, divergence, gauge transforms and support checks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;

/// Relative tolerance for declared-support checks.
pub const TOL_SUPPORT: f64 = 1e-10;

/// Real scalar field sampled at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
    support_radius: f64,
}

impl ScalarField {
    /// Wraps samples; the length must equal the node count.
    pub fn new(grid: SpaceTimeGrid, values: Vec<f64>, support_radius: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, support_radius })
    }

    /// Identically zero field.
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()], support_radius: 0.0 }
    }

    /// Samples `f(point)` at every node.
    pub fn from_fn(grid: &SpaceTimeGrid, support_radius: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut p = vec![0.0; grid.n_space() + 1];
        let values = (0..grid.len())
            .map(|i| {
                grid.lattice().point(i, &mut p);
                f(&p)
            })
            .collect();
        Self { grid: grid.clone(), values, support_radius }
    }

    /// Grid of the field.
    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    /// Samples in row-major order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Declared spatial support radius (infinite when unknown).
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Largest absolute sample.
    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    /// Consumes the field and returns its samples.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise linear combination `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
            support_radius: self.support_radius.max(other.support_radius),
        })
    }
}

/// Complex scalar field sampled at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: SpaceTimeGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    /// Wraps samples; the length must equal the node count.
    pub fn new(grid: SpaceTimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Grid of the field.
    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    /// Samples in row-major order.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Consumes the field and returns its samples.
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Real parts as a [`ScalarField`] with the given support radius.
    pub fn real_part(&self, support_radius: f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z.re).collect(),
            support_radius,
        }
    }
}

/// Vector potential `(A₀, A₁, …, A_n)` on a common grid, `A₀` being the time component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPotential {
    grid: SpaceTimeGrid,
    components: Vec<Vec<f64>>,
    support_radius: f64,
    max_abs: f64,
}

impl VectorPotential {
    /// Wraps `n_space + 1` component arrays.
    pub fn new(grid: SpaceTimeGrid, components: Vec<Vec<f64>>, support_radius: f64) -> Result<Self> {
        if components.len() != grid.n_space() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} components for n_space = {}",
                components.len(),
                grid.n_space()
            )));
        }
        if let Some(c) = components.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::ShapeMismatch(format!(
                "component of length {} on a grid of {} nodes",
                c.len(),
                grid.len()
            )));
        }
        if support_radius.is_nan() || support_radius < 0.0 {
            return Err(Error::Domain(format!("support radius {support_radius}")));
        }
        let max_abs = components.iter().map(|c| max_abs(c)).fold(0.0, f64::max);
        Ok(Self { grid, components, support_radius, max_abs })
    }

    /// Identically zero potential.
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        let components = vec![vec![0.0; grid.len()]; grid.n_space() + 1];
        Self { grid: grid.clone(), components, support_radius: 0.0, max_abs: 0.0 }
    }

    /// Grid of the potential.
    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    /// Number of spatial dimensions.
    pub fn n_space(&self) -> usize {
        self.grid.n_space()
    }

    /// Component `j` (0 = time component).
    pub fn component(&self, j: usize) -> &[f64] {
        &self.components[j]
    }

    /// All components.
    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Declared spatial support radius.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Largest absolute value over all components.
    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    /// Returns `Σ_j w_j A_j` as a flat array.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (c, &w) in self.components.iter().zip(weights) {
            if w != 0.0 {
                for (o, x) in out.iter_mut().zip(c) {
                    *o += w * x;
                }
            }
        }
        out
    }

    /// The light-ray integrand `A₀ + Σ ω_j A_j`.
    pub fn ray_density(&self, omega: &[f64]) -> Vec<f64> {
        let mut w = vec![1.0];
        w.extend_from_slice(omega);
        self.combine(&w)
    }

    /// Componentwise `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &VectorPotential, b: f64) -> Result<VectorPotential> {
        same_grid(&self.grid, &other.grid)?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
            .collect();
        VectorPotential::new(
            self.grid.clone(),
            components,
            self.support_radius.max(other.support_radius),
        )
    }

    /// Multiplies every component by `s`.
    pub fn scaled(&self, s: f64) -> VectorPotential {
        let components = self.components.iter().map(|c| c.iter().map(|x| s * x).collect()).collect();
        VectorPotential {
            grid: self.grid.clone(),
            components,
            support_radius: self.support_radius,
            max_abs: self.max_abs * s.abs(),
        }
    }

    /// Returns the potential with a different declared support radius.
    pub fn with_support_radius(mut self, r: f64) -> VectorPotential {
        self.support_radius = r;
        self
    }
}

/// Vector potential together with the scalar potential on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    /// Vector potential `𝒜`.
    pub a: VectorPotential,
    /// Scalar potential `V`.
    pub v: ScalarField,
}

impl PotentialPair {
    /// Pairs `A` and `V`, checking that they share a grid.
    pub fn new(a: VectorPotential, v: ScalarField) -> Result<Self> {
        same_grid(a.grid(), v.grid())?;
        Ok(Self { a, v })
    }

    /// Zero potentials on `grid`.
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self { a: VectorPotential::zeros(grid), v: ScalarField::zeros(grid) }
    }

    /// Shared grid.
    pub fn grid(&self) -> &SpaceTimeGrid {
        self.a.grid()
    }
}

/// Result of a declared-support check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    /// Largest absolute value at nodes with `|x| ≥ R`.
    pub max_outside: f64,
    /// Absolute tolerance applied.
    pub tol: f64,
    /// Whether `max_outside` is below `tol`.
    pub pass: bool,
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn same_grid(a: &SpaceTimeGrid, b: &SpaceTimeGrid) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch("fields live on different grids".into()));
    }
    Ok(())
}

/// Finite-difference derivative along `axis`: central in the interior,
/// second-order one-sided at the two ends.
pub fn derivative(grid: &SpaceTimeGrid, data: &[f64], axis: usize) -> Vec<f64> {
    let lat = grid.lattice();
    let n = lat.shape[axis];
    let stride = lat.strides()[axis];
    let h = lat.spacing[axis];
    let mut out = vec![0.0; data.len()];
    let outer = data.len() / (n * stride);
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * n * stride + inner;
            let at = |i: usize| data[base + i * stride];
            out[base] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
            for i in 1..n - 1 {
                out[base + i * stride] = (at(i + 1) - at(i - 1)) / (2.0 * h);
            }
            out[base + (n - 1) * stride] = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
        }
    }
    out
}

/// Space-time gradient `(∂_t φ, ∂_{x₁} φ, …)` of a scalar field.
pub fn gradient(phi: &ScalarField) -> VectorPotential {
    let grid = phi.grid();
    let components = (0..=grid.n_space()).map(|a| derivative(grid, phi.values(), a)).collect();
    VectorPotential::new(grid.clone(), components, phi.support_radius())
        .expect("gradient has n_space + 1 components of grid length")
}

/// Space-time divergence `∂_t A₀ + Σ_j ∂_{x_j} A_j`.
pub fn divergence(a: &VectorPotential) -> ScalarField {
    let grid = a.grid();
    let mut out = vec![0.0; grid.len()];
    for j in 0..=grid.n_space() {
        let d = derivative(grid, a.component(j), j);
        for (o, x) in out.iter_mut().zip(d) {
            *o += x;
        }
    }
    ScalarField { grid: grid.clone(), values: out, support_radius: a.support_radius() }
}

/// Spatial Euclidean norm of the node with flat index `f`.
pub(crate) fn spatial_radius(grid: &SpaceTimeGrid, f: usize) -> f64 {
    let lat = grid.lattice();
    let mut rest = f;
    let mut r2 = 0.0;
    for a in (1..lat.dim()).rev() {
        let i = rest % lat.shape[a];
        rest /= lat.shape[a];
        let x = lat.coord(a, i);
        r2 += x * x;
    }
    r2.sqrt()
}

/// True if the node lies on the lateral boundary `ℝ × ∂Ω` of the box.
pub(crate) fn on_lateral_boundary(grid: &SpaceTimeGrid, f: usize) -> bool {
    let lat = grid.lattice();
    let mut rest = f;
    for a in (1..lat.dim()).rev() {
        let i = rest % lat.shape[a];
        rest /= lat.shape[a];
        if i == 0 || i == lat.shape[a] - 1 {
            return true;
        }
    }
    false
}

/// Checks that every component of `a` vanishes (relative to its maximum) at nodes with `|x| ≥ r`.
pub fn check_support(a: &VectorPotential, r: f64) -> SupportReport {
    let mut worst = 0.0f64;
    for f in 0..a.grid().len() {
        if spatial_radius(a.grid(), f) >= r {
            for c in a.components() {
                worst = worst.max(c[f].abs());
            }
        }
    }
    let tol = TOL_SUPPORT * a.max_abs();
    SupportReport { max_outside: worst, tol, pass: worst <= tol }
}

/// Same check for a scalar field.
pub fn check_support_scalar(v: &ScalarField, r: f64) -> SupportReport {
    let mut worst = 0.0f64;
    for (f, x) in v.values().iter().enumerate() {
        if spatial_radius(v.grid(), f) >= r {
            worst = worst.max(x.abs());
        }
    }
    let tol = TOL_SUPPORT * v.max_abs();
    SupportReport { max_outside: worst, tol, pass: worst <= tol }
}

/// Gauge transform `(A, V) ↦ (A + ∇φ, V)` with the default boundary tolerance
/// `1e-8 · max|φ|`.
pub fn gauge_transform(
    a: &VectorPotential,
    v: &ScalarField,
    phi: &ScalarField,
) -> Result<(VectorPotential, ScalarField)> {
    gauge_transform_with_tol(a, v, phi, 1e-8 * phi.max_abs())
}

/// Gauge transform with an explicit absolute tolerance for `|φ|` on the lateral boundary.
pub fn gauge_transform_with_tol(
    a: &VectorPotential,
    v: &ScalarField,
    phi: &ScalarField,
    tol: f64,
) -> Result<(VectorPotential, ScalarField)> {
    same_grid(a.grid(), v.grid())?;
    same_grid(a.grid(), phi.grid())?;
    let grid = a.grid();
    let max_boundary = (0..grid.len())
        .filter(|&f| on_lateral_boundary(grid, f))
        .fold(0.0f64, |m, f| m.max(phi.values()[f].abs()));
    if max_boundary > tol {
        return Err(Error::GaugeBoundary { max_boundary, tol });
    }
    let grad = gradient(phi);
    let support = a.support_radius().max(phi.support_radius());
    let shifted = a.axpby(1.0, &grad, 1.0)?.with_support_radius(support);
    Ok((shifted, v.clone()))
}
