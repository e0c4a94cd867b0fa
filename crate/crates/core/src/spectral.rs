//! Discrete Fourier transforms with the continuous-transform convention
//! `f̂(τ, ξ) = ∫ e^{−i(tτ + x·ξ)} f dt dx`, inverse `(2π)^{−(n+1)} ∫ e^{+i(tτ + x·ξ)} f̂`.
//!
//! Sums are scaled by the cell volume and carry the phase of the lattice origin,
//! so a smooth, compactly supported field has DFT values approximating its
//! continuous transform at the frequency nodes `2πk/(N h)`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::{Lattice, SpaceTimeGrid};

/// Complex spectrum on the dual lattice with explicit frequency axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    /// Lattice of the originating samples.
    pub source: Lattice,
    /// Frequency coordinates per axis in FFT order (`τ` first for space-time data).
    pub freqs: Vec<Vec<f64>>,
    /// Spectrum values, row-major in FFT order.
    pub values: Vec<Complex64>,
    /// Largest edge sample of the input relative to its maximum (wraparound indicator).
    pub edge_leakage: f64,
}

/// Signed FFT-order angular frequencies `2πk/(N h)` for an axis.
pub fn fft_freqs(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let kk = if k < (n + 1) / 2 { k as f64 } else { k as f64 - n as f64 };
            2.0 * std::f64::consts::PI * kk / (n as f64 * h)
        })
        .collect()
}

/// Index in FFT order of the mirrored frequency `−k`.
pub fn mirror_index(k: usize, n: usize) -> usize {
    (n - k) % n
}

/// Unnormalized in-place FFT along one axis of a row-major array.
pub fn fft_axis(data: &mut [Complex64], shape: &[usize], axis: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let n = shape[axis];
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let stride: usize = shape[axis + 1..].iter().product();
    if stride == 1 {
        fft.process(data);
        return;
    }
    let block = n * stride;
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for b in (0..data.len()).step_by(block) {
        for inner in 0..stride {
            for i in 0..n {
                line[i] = data[b + inner + i * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for i in 0..n {
                data[b + inner + i * stride] = line[i];
            }
        }
    }
}

/// Unnormalized FFT over every axis.
pub fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::new();
    for axis in 0..shape.len() {
        fft_axis(data, shape, axis, inverse, &mut planner);
    }
}

fn edge_leakage(lat: &Lattice, mag: impl Fn(usize) -> f64) -> f64 {
    let mut max_all = 0.0f64;
    let mut max_edge = 0.0f64;
    let mut idx = vec![0; lat.dim()];
    for f in 0..lat.len() {
        let m = mag(f);
        max_all = max_all.max(m);
        lat.unflat(f, &mut idx);
        if idx.iter().zip(&lat.shape).any(|(&i, &n)| i == 0 || i == n - 1) {
            max_edge = max_edge.max(m);
        }
    }
    if max_all == 0.0 {
        0.0
    } else {
        max_edge / max_all
    }
}

/// Multiplies FFT output by `Π h_a · e^{−i Σ ω_a o_a}` (or divides, for the inverse).
fn apply_origin_phase(lat: &Lattice, freqs: &[Vec<f64>], data: &mut [Complex64], forward: bool) {
    let vol = lat.cell_volume();
    let d = lat.dim();
    let phases: Vec<Vec<Complex64>> = (0..d)
        .map(|a| freqs[a].iter().map(|w| Complex64::from_polar(1.0, -w * lat.origin[a])).collect())
        .collect();
    let mut idx = vec![0; d];
    for (f, z) in data.iter_mut().enumerate() {
        lat.unflat(f, &mut idx);
        let mut ph = Complex64::new(vol, 0.0);
        for a in 0..d {
            ph *= phases[a][idx[a]];
        }
        if forward {
            *z *= ph;
        } else {
            *z /= ph;
        }
    }
}

/// Forward transform of complex samples on a lattice.
pub fn dft_lattice(lat: &Lattice, values: Vec<Complex64>) -> SpectralField {
    let leak = edge_leakage(lat, |f| values[f].norm());
    let mut data = values;
    fft_nd(&mut data, &lat.shape, false);
    let freqs: Vec<Vec<f64>> = (0..lat.dim()).map(|a| fft_freqs(lat.shape[a], lat.spacing[a])).collect();
    apply_origin_phase(lat, &freqs, &mut data, true);
    SpectralField { source: lat.clone(), freqs, values: data, edge_leakage: leak }
}

/// Forward transform of real samples on a lattice.
pub fn dft_real(lat: &Lattice, values: &[f64]) -> SpectralField {
    dft_lattice(lat, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
}

/// Inverse transform back to samples on the source lattice.
pub fn idft_lattice(spec: &SpectralField) -> Vec<Complex64> {
    let lat = &spec.source;
    let mut data = spec.values.clone();
    apply_origin_phase(lat, &spec.freqs, &mut data, false);
    fft_nd(&mut data, &lat.shape, true);
    let n = lat.len() as f64;
    data.iter_mut().for_each(|z| *z /= n);
    data
}

/// Space-time DFT of a real field. Edge leakage above `1e-8` is recorded in the result.
pub fn dft(field: &ScalarField) -> SpectralField {
    dft_real(field.grid().lattice(), field.values())
}

/// Space-time DFT of a complex field.
pub fn dft_complex(field: &ComplexField) -> SpectralField {
    dft_lattice(field.grid().lattice(), field.values().to_vec())
}

/// Inverse space-time DFT onto `grid`, which must match the spectrum's source lattice.
pub fn idft(spec: &SpectralField, grid: &SpaceTimeGrid) -> Result<ComplexField> {
    if grid.lattice() != &spec.source {
        return Err(Error::ShapeMismatch("spectrum does not originate from this grid".into()));
    }
    ComplexField::new(grid.clone(), idft_lattice(spec))
}

impl SpectralField {
    /// Frequency vector of the node with flat index `f`.
    pub fn freq_of(&self, f: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.source.dim()];
        self.source.unflat(f, &mut idx);
        for a in 0..idx.len() {
            out[a] = self.freqs[a][idx[a]];
        }
    }

    /// Flat index of the mirrored node `−w`.
    pub fn mirror(&self, f: usize) -> usize {
        let mut idx = vec![0; self.source.dim()];
        self.source.unflat(f, &mut idx);
        for a in 0..idx.len() {
            idx[a] = mirror_index(idx[a], self.source.shape[a]);
        }
        self.source.flat(&idx)
    }

    /// Largest relative violation of `value(−w) = conj(value(w))`, skipping
    /// Nyquist planes of even-length axes (they have no mirror partner).
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut idx = vec![0; self.source.dim()];
        let mut worst = 0.0f64;
        for f in 0..self.values.len() {
            self.source.unflat(f, &mut idx);
            if idx.iter().zip(&self.source.shape).any(|(&i, &n)| n % 2 == 0 && i == n / 2) {
                continue;
            }
            let g = self.mirror(f);
            worst = worst.max((self.values[f] - self.values[g].conj()).norm());
        }
        worst / scale
    }

    /// Largest magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn freqs_fft_order() {
        let w = fft_freqs(4, 1.0);
        let q = std::f64::consts::FRAC_PI_2;
        assert_eq!(w, vec![0.0, q, -2.0 * q, -q]);
        let w5 = fft_freqs(5, 1.0);
        assert!(w5[2] > 0.0 && w5[3] < 0.0);
    }

    #[test]
    fn gaussian_matches_continuous_transform() {
        let lat = Lattice::new(vec![128], vec![-8.0], vec![0.125]).unwrap();
        let mut p = [0.0];
        let vals: Vec<f64> = (0..128).map(|f| { lat.point(f, &mut p); (-(p[0] - 0.3).powi(2)).exp() }).collect();
        let s = dft_real(&lat, &vals);
        for (k, &w) in s.freqs[0].iter().enumerate() {
            let exact = std::f64::consts::PI.sqrt() * (-w * w / 4.0).exp() * Complex64::from_polar(1.0, -0.3 * w);
            assert!((s.values[k] - exact).norm() < 1e-10, "k={k}");
        }
    }
}
