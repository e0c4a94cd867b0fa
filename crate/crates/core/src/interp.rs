//! Tensor-product interpolation of lattice samples (multilinear or 4-point Lagrange).

use serde::{Deserialize, Serialize};

use crate::grid::Lattice;

/// Interpolation order used when sampling a field off the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    /// Multilinear (2 taps per axis).
    #[default]
    Linear,
    /// Cubic Lagrange (4 taps per axis, stencil shifted inward at the edges).
    Cubic,
}

impl Interp {
    fn taps(self) -> usize {
        match self {
            Interp::Linear => 2,
            Interp::Cubic => 4,
        }
    }
}

/// Evaluates a weighted sum of lattice fields at arbitrary points.
///
/// The tap weights are computed once per point and shared by all fields.
pub struct Sampler<'a> {
    lat: &'a Lattice,
    strides: Vec<usize>,
    fields: Vec<&'a [f64]>,
    weights: Vec<f64>,
    interp: Interp,
}

impl<'a> Sampler<'a> {
    /// Sampler for a single field.
    pub fn new(lat: &'a Lattice, data: &'a [f64], interp: Interp) -> Self {
        Self::weighted(lat, vec![data], vec![1.0], interp)
    }

    /// Sampler for `Σ_c weights[c]·fields[c]`; zero weights are dropped.
    pub fn weighted(lat: &'a Lattice, fields: Vec<&'a [f64]>, weights: Vec<f64>, interp: Interp) -> Self {
        let (fields, weights): (Vec<_>, Vec<_>) =
            fields.into_iter().zip(weights).filter(|(_, w)| *w != 0.0).unzip();
        Self { lat, strides: lat.strides(), fields, weights, interp }
    }

    /// Lattice being sampled.
    pub fn lattice(&self) -> &Lattice {
        self.lat
    }

    /// True when every weight is zero.
    pub fn is_zero(&self) -> bool {
        self.fields.is_empty()
    }

    #[inline]
    fn axis_weights(&self, a: usize, x: f64, w: &mut [f64; 4]) -> usize {
        let n = self.lat.shape[a];
        let u = ((x - self.lat.origin[a]) / self.lat.spacing[a]).clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        match self.interp {
            Interp::Linear => {
                let f = u - i as f64;
                w[0] = 1.0 - f;
                w[1] = f;
                i
            }
            Interp::Cubic => {
                let s = if n < 4 { 0 } else { i.saturating_sub(1).min(n - 4) };
                let t = u - s as f64;
                let (t1, t2, t3) = (t - 1.0, t - 2.0, t - 3.0);
                w[0] = -t1 * t2 * t3 / 6.0;
                w[1] = t * t2 * t3 / 2.0;
                w[2] = -t * t1 * t3 / 2.0;
                w[3] = t * t1 * t2 / 6.0;
                s
            }
        }
    }

    #[inline]
    fn gather(&self, idx: usize) -> f64 {
        let mut v = 0.0;
        for (f, w) in self.fields.iter().zip(&self.weights) {
            v += w * f[idx];
        }
        v
    }

    /// Interpolated value at `p` (coordinates clamped to the lattice box).
    pub fn eval(&self, p: &[f64]) -> f64 {
        if self.fields.is_empty() {
            return 0.0;
        }
        let d = self.lat.dim();
        let k = self.interp.taps();
        let mut w = [[0.0; 4]; 4];
        let mut base = 0;
        for a in 0..d {
            base += self.axis_weights(a, p[a], &mut w[a]) * self.strides[a];
        }
        let s = &self.strides;
        match d {
            1 => (0..k).map(|i| w[0][i] * self.gather(base + i * s[0])).sum(),
            2 => {
                let mut acc = 0.0;
                for i in 0..k {
                    let mut row = 0.0;
                    for j in 0..k {
                        row += w[1][j] * self.gather(base + i * s[0] + j * s[1]);
                    }
                    acc += w[0][i] * row;
                }
                acc
            }
            3 => {
                let mut acc = 0.0;
                for i in 0..k {
                    let mut plane = 0.0;
                    for j in 0..k {
                        let off = base + i * s[0] + j * s[1];
                        let mut row = 0.0;
                        for l in 0..k {
                            row += w[2][l] * self.gather(off + l * s[2]);
                        }
                        plane += w[1][j] * row;
                    }
                    acc += w[0][i] * plane;
                }
                acc
            }
            4 => {
                let mut acc = 0.0;
                for i in 0..k {
                    let mut cube = 0.0;
                    for j in 0..k {
                        let mut plane = 0.0;
                        for l in 0..k {
                            let off = base + i * s[0] + j * s[1] + l * s[2];
                            let mut row = 0.0;
                            for m in 0..k {
                                row += w[3][m] * self.gather(off + m * s[3]);
                            }
                            plane += w[2][l] * row;
                        }
                        cube += w[1][j] * plane;
                    }
                    acc += w[0][i] * cube;
                }
                acc
            }
            _ => unreachable!("lattices of dimension > 4 are not interpolated"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_polynomials() {
        let lat = Lattice::new(vec![6, 7, 5], vec![-1.0, 0.0, 0.5], vec![0.3, 0.2, 0.25]).unwrap();
        let mut p = [0.0; 3];
        let lin = |p: &[f64]| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[2] + p[0] * p[1] * p[2];
        let cub = |p: &[f64]| p[0].powi(3) - p[1] * p[1] * p[2] + p[2].powi(3) * p[0];
        let dl: Vec<f64> = (0..lat.len()).map(|f| { lat.point(f, &mut p); lin(&p) }).collect();
        let dc: Vec<f64> = (0..lat.len()).map(|f| { lat.point(f, &mut p); cub(&p) }).collect();
        let sl = Sampler::new(&lat, &dl, Interp::Linear);
        let sc = Sampler::new(&lat, &dc, Interp::Cubic);
        for q in [[-0.93, 0.11, 0.52], [0.4, 1.17, 1.49], [0.5, 0.6, 1.0]] {
            assert!((sl.eval(&q) - lin(&q)).abs() < 1e-12);
            assert!((sc.eval(&q) - cub(&q)).abs() < 1e-12);
        }
    }
}
