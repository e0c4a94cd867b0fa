//! Uniform rectangular lattices and the space-time grid built on them.
//!
//! Storage is row-major with the last axis fastest. For a [`SpaceTimeGrid`]
//! axis 0 is time and axes `1..=n_space` are space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor-product lattice of arbitrary dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    /// Sample count per axis.
    pub shape: Vec<usize>,
    /// Coordinate of the first sample per axis.
    pub origin: Vec<f64>,
    /// Step per axis (strictly positive).
    pub spacing: Vec<f64>,
}

impl Lattice {
    /// Builds a lattice, checking lengths, counts and spacings.
    pub fn new(shape: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() != origin.len() || shape.len() != spacing.len() {
            return Err(Error::InvalidGrid(format!(
                "shape/origin/spacing lengths {}/{}/{} must agree and be nonzero",
                shape.len(),
                origin.len(),
                spacing.len()
            )));
        }
        if let Some(&n) = shape.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidGrid(format!("axis with {n} samples")));
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacings must be positive: {spacing:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid(format!("origin must be finite: {origin:?}")));
        }
        Ok(Self { shape, origin, spacing })
    }

    /// Lattice covering `[lo, hi]` on every axis with `n` samples each.
    pub fn cube(dim: usize, n: usize, lo: f64, hi: f64) -> Result<Self> {
        let h = (hi - lo) / (n as f64 - 1.0);
        Self::new(vec![n; dim], vec![lo; dim], vec![h; dim])
    }

    /// Number of axes.
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    /// True when the lattice has no nodes (never for a validated lattice).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for a in (0..self.dim().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    /// Coordinate of sample `i` along `axis`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing[axis]
    }

    /// Coordinate of the last sample along `axis`.
    pub fn upper(&self, axis: usize) -> f64 {
        self.coord(axis, self.shape[axis] - 1)
    }

    /// Flat index of a multi-index.
    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (a, &i) in idx.iter().enumerate() {
            f = f * self.shape[a] + i;
        }
        f
    }

    /// Multi-index of a flat index.
    pub fn unflat(&self, mut f: usize, out: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            out[a] = f % self.shape[a];
            f /= self.shape[a];
        }
    }

    /// Physical coordinates of a flat index.
    pub fn point(&self, f: usize, out: &mut [f64]) {
        let mut rest = f;
        for a in (0..self.dim()).rev() {
            let i = rest % self.shape[a];
            rest /= self.shape[a];
            out[a] = self.coord(a, i);
        }
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    /// Product of spacings (cell volume).
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// True if `p` lies in the closed bounding box.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(a, &x)| x >= self.origin[a] && x <= self.upper(a))
    }
}

/// Space-time grid over `[t_min, t_max] × Π [x_min, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    n_space: usize,
    lattice: Lattice,
}

impl SpaceTimeGrid {
    /// Builds a grid; axis 0 is time. Requires `n_space ∈ {1,2,3}` and at least 4 samples per axis.
    pub fn new(n_space: usize, shape: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&n_space) {
            return Err(Error::InvalidGrid(format!("n_space = {n_space} not in 1..=3")));
        }
        if shape.len() != n_space + 1 {
            return Err(Error::InvalidGrid(format!(
                "expected {} axes, got {}",
                n_space + 1,
                shape.len()
            )));
        }
        if let Some(&n) = shape.iter().find(|&&n| n < 4) {
            return Err(Error::InvalidGrid(format!("axis with {n} < 4 samples")));
        }
        Ok(Self { n_space, lattice: Lattice::new(shape, origin, spacing)? })
    }

    /// Grid with `nt` time samples on `[t0, t1]` and `nx` samples on `[x0, x1]` per spatial axis.
    pub fn uniform(n_space: usize, nt: usize, t: (f64, f64), nx: usize, x: (f64, f64)) -> Result<Self> {
        let mut shape = vec![nt];
        let mut origin = vec![t.0];
        let mut spacing = vec![(t.1 - t.0) / (nt as f64 - 1.0)];
        for _ in 0..n_space {
            shape.push(nx);
            origin.push(x.0);
            spacing.push((x.1 - x.0) / (nx as f64 - 1.0));
        }
        Self::new(n_space, shape, origin, spacing)
    }

    /// Number of spatial dimensions.
    pub fn n_space(&self) -> usize {
        self.n_space
    }

    /// Underlying lattice (time axis first).
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Sample counts, time first.
    pub fn shape(&self) -> &[usize] {
        &self.lattice.shape
    }

    /// Axis origins, time first.
    pub fn origin(&self) -> &[f64] {
        &self.lattice.origin
    }

    /// Axis spacings, time first.
    pub fn spacing(&self) -> &[f64] {
        &self.lattice.spacing
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    /// True for an empty grid (never after validation).
    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// Number of time samples.
    pub fn nt(&self) -> usize {
        self.lattice.shape[0]
    }

    /// Time step.
    pub fn dt(&self) -> f64 {
        self.lattice.spacing[0]
    }

    /// Nodes per time slice.
    pub fn slice_len(&self) -> usize {
        self.lattice.shape[1..].iter().product()
    }

    /// Spatial lattice (the t = const slice).
    pub fn spatial(&self) -> Lattice {
        Lattice {
            shape: self.lattice.shape[1..].to_vec(),
            origin: self.lattice.origin[1..].to_vec(),
            spacing: self.lattice.spacing[1..].to_vec(),
        }
    }

    /// Smallest spatial spacing.
    pub fn min_dx(&self) -> f64 {
        self.lattice.spacing[1..].iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Time coordinate of slice `i`.
    pub fn t(&self, i: usize) -> f64 {
        self.lattice.coord(0, i)
    }
}
