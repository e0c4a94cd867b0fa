//! Reconstruction of space-time spectra from families of ray fields in two
//! space dimensions.
//!
//! Ray fields are computed at `K` equally spaced directions `θ_j`, transformed
//! in space, and interpolated trigonometrically in `θ`, so that `G(ξ; ω)` is
//! available for every unit `ω` at every frequency node `ξ`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{derivative, ScalarField, VectorPotential};
use crate::grid::Lattice;
use crate::ray::{ray_field, ray_field_scalar, RayOptions};
use crate::slice::{circle_param, solve_omega};
use crate::spectral::{dft_real, fft_freqs, idft_lattice, SpectralField};
use crate::stability::{build_direction_system, reconstruct_with};

/// Potential whose ray fields feed a family.
#[derive(Debug, Clone, Copy)]
pub enum RaySource<'a> {
    Vector(&'a VectorPotential),
    Scalar(&'a ScalarField),
}

impl RaySource<'_> {
    fn spatial(&self) -> Lattice {
        match self {
            RaySource::Vector(a) => a.grid().spatial(),
            RaySource::Scalar(v) => v.grid().spatial(),
        }
    }

    fn n_space(&self) -> usize {
        match self {
            RaySource::Vector(a) => a.n_space(),
            RaySource::Scalar(v) => v.grid().n_space(),
        }
    }
}

/// Settings of the family and the reconstructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyOptions {
    /// Number of directions `K` (rounded up to odd).
    pub n_angles: usize,
    /// Extra periods of base points on each side of the spatial lattice; ray
    /// data outside the lattice is folded back, which samples the spatial
    /// transform exactly at the lattice frequencies.
    pub periods: usize,
    pub ray: RayOptions,
    /// Divergence tolerance relative to `max_j ‖∂_j A_j‖_∞`.
    pub tol_div_rel: f64,
}

impl Default for TomographyOptions {
    fn default() -> Self {
        Self { n_angles: 81, periods: 0, ray: RayOptions::default(), tol_div_rel: 0.05 }
    }
}

/// Trigonometric interpolant in `θ` of the spatial spectra of `K` ray fields.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFamily {
    /// Spatial lattice whose frequency nodes index the family.
    pub target: Lattice,
    pub n_angles: usize,
    /// Fourier coefficients in `θ`, `[m][node]` with `m` in FFT order.
    pub coeffs: Vec<Complex64>,
    /// Largest ray-quadrature error estimate over all fields.
    pub max_error_estimate: f64,
}

fn extended_lattice(target: &Lattice, periods: usize) -> Lattice {
    let reps = 2 * periods + 1;
    let shape = target.shape.iter().map(|&n| n * reps).collect();
    let origin = target
        .origin
        .iter()
        .zip(&target.shape)
        .zip(&target.spacing)
        .map(|((o, &n), h)| o - periods as f64 * n as f64 * h)
        .collect();
    Lattice { shape, origin, spacing: target.spacing.clone() }
}

fn fold(ext: &Lattice, target: &Lattice, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; target.len()];
    let mut idx = vec![0; ext.dim()];
    for (f, v) in values.iter().enumerate() {
        ext.unflat(f, &mut idx);
        for (i, &n) in idx.iter_mut().zip(&target.shape) {
            *i %= n;
        }
        out[target.flat(&idx)] += v;
    }
    out
}

impl AngularFamily {
    /// Computes `K` ray fields and their interpolant (two space dimensions only).
    pub fn build(source: RaySource<'_>, opts: &TomographyOptions) -> Result<Self> {
        if source.n_space() != 2 {
            return Err(Error::Domain("angular ray families are implemented for n = 2".into()));
        }
        let k = opts.n_angles.max(3) | 1;
        let target = source.spatial();
        let ext = extended_lattice(&target, opts.periods);
        let m = target.len();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k * m];
        let mut worst = 0.0f64;
        for j in 0..k {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            let omega = [theta.cos(), theta.sin()];
            let rf = match source {
                RaySource::Vector(a) => ray_field(a, &omega, &ext, &opts.ray)?,
                RaySource::Scalar(v) => ray_field_scalar(v, &omega, &ext, &opts.ray)?,
            };
            worst = worst.max(rf.max_error_estimate);
            let folded = if opts.periods == 0 { rf.values } else { fold(&ext, &target, &rf.values) };
            let spec = dft_real(&target, &folded);
            coeffs[j * m..(j + 1) * m].copy_from_slice(&spec.values);
        }
        let mut planner = FftPlanner::new();
        crate::spectral::fft_axis(&mut coeffs, &[k, m], 0, false, &mut planner);
        let inv = 1.0 / k as f64;
        coeffs.iter_mut().for_each(|z| *z *= inv);
        Ok(Self { target, n_angles: k, coeffs, max_error_estimate: worst })
    }

    /// `G(ξ_node; (cos θ, sin θ))`.
    pub fn eval(&self, node: usize, theta: f64) -> Complex64 {
        let k = self.n_angles;
        let m = self.target.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for q in 0..k {
            let order = if q < (k + 1) / 2 { q as f64 } else { q as f64 - k as f64 };
            acc += self.coeffs[q * m + node] * Complex64::from_polar(1.0, order * theta);
        }
        acc
    }

    /// `G` at a unit direction.
    pub fn eval_omega(&self, node: usize, omega: &[f64]) -> Complex64 {
        self.eval(node, omega[1].atan2(omega[0]))
    }
}

/// Spectrum reconstructed on a subset of the space-time frequency lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpectrum {
    /// Space-time lattice of the input potential (frequencies in FFT order).
    pub lattice: Lattice,
    /// Flat indices of the reconstructed nodes.
    pub nodes: Vec<usize>,
    /// Per node, `(Â₀, …, Â_n)`.
    pub values: Vec<Vec<Complex64>>,
}

/// Space-time nodes with `ξ ≠ 0`, `|τ| ≤ |ξ|/2` and `|ξ| ≤` half the spatial Nyquist frequency.
pub fn half_cone_nodes(lat: &Lattice) -> Vec<usize> {
    let d = lat.dim();
    let freqs: Vec<Vec<f64>> = (0..d).map(|a| fft_freqs(lat.shape[a], lat.spacing[a])).collect();
    let nyq = lat.spacing[1..].iter().map(|h| std::f64::consts::PI / h).fold(f64::INFINITY, f64::min);
    let mut idx = vec![0; d];
    (0..lat.len())
        .filter(|&f| {
            lat.unflat(f, &mut idx);
            let r = (1..d).map(|a| freqs[a][idx[a]].powi(2)).sum::<f64>().sqrt();
            r > 0.0 && r <= 0.5 * nyq && freqs[0][idx[0]].abs() <= 0.5 * r
        })
        .collect()
}

/// Largest `|div 𝒜|` relative to `max_j ‖∂_j A_j‖_∞`.
pub fn divergence_ratio(a: &VectorPotential) -> f64 {
    let grid = a.grid();
    let mut div = vec![0.0; grid.len()];
    let mut scale = 0.0f64;
    for j in 0..=a.n_space() {
        let d = derivative(grid, a.component(j), j);
        scale = scale.max(crate::field::max_abs(&d));
        div.iter_mut().zip(&d).for_each(|(s, x)| *s += x);
    }
    if scale == 0.0 {
        0.0
    } else {
        crate::field::max_abs(&div) / scale
    }
}

/// Solves the direction system at every half-cone node using ray data only.
pub fn reconstruct_divfree(a: &VectorPotential, opts: &TomographyOptions) -> Result<RegionSpectrum> {
    let ratio = divergence_ratio(a);
    if ratio > opts.tol_div_rel {
        return Err(Error::Domain(format!("potential is not divergence free (relative divergence {ratio:.3e})")));
    }
    let family = AngularFamily::build(RaySource::Vector(a), opts)?;
    reconstruct_divfree_from(&family, a.grid().lattice())
}

/// Half-cone reconstruction from a prebuilt family on the space-time lattice `lat`.
pub fn reconstruct_divfree_from(family: &AngularFamily, lat: &Lattice) -> Result<RegionSpectrum> {
    let nodes = half_cone_nodes(lat);
    let d = lat.dim();
    let spatial_len = family.target.len();
    let freqs: Vec<Vec<f64>> = (0..d).map(|a| fft_freqs(lat.shape[a], lat.spacing[a])).collect();
    let mirror_spec = SpectralField {
        source: family.target.clone(),
        freqs: freqs[1..].to_vec(),
        values: Vec::new(),
        edge_leakage: 0.0,
    };
    let values: Result<Vec<Vec<Complex64>>> = nodes
        .par_iter()
        .map(|&f| {
            let mut idx = vec![0; d];
            lat.unflat(f, &mut idx);
            let tau = freqs[0][idx[0]];
            let xi: Vec<f64> = (1..d).map(|a| freqs[a][idx[a]]).collect();
            let s = f % spatial_len;
            let s_m = mirror_spec.mirror(s);
            let sys = build_direction_system(tau, &xi)?;
            let g: Vec<Complex64> = sys.omegas.iter().map(|w| family.eval_omega(s, w)).collect();
            let h: Vec<Complex64> = sys.omegas.iter().map(|w| family.eval_omega(s_m, w)).collect();
            reconstruct_with(&sys, &g, Some(&h))
        })
        .collect();
    Ok(RegionSpectrum { lattice: lat.clone(), nodes, values: values? })
}

/// Scalar potential recovered from its ray family.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarReconstruction {
    /// Spectrum with data inside `|τ| < |ξ|` and zeros elsewhere.
    pub spectrum: SpectralField,
    /// Real part of the inverse transform on the input grid.
    pub values: Vec<f64>,
    /// Number of frequency nodes carrying ray data.
    pub n_data_nodes: usize,
}

/// Fills `V̂(τ, ξ)` for `|τ| < |ξ|` from ray data (averaging the two directions
/// solving `τ + ω·ξ = 0`), zeroes the light cone, and inverts.
pub fn reconstruct_scalar(v: &ScalarField, opts: &TomographyOptions) -> Result<ScalarReconstruction> {
    let family = AngularFamily::build(RaySource::Scalar(v), opts)?;
    reconstruct_scalar_from(&family, v.grid().lattice())
}

/// Scalar reconstruction from a prebuilt family on the space-time lattice `lat`.
pub fn reconstruct_scalar_from(family: &AngularFamily, lat: &Lattice) -> Result<ScalarReconstruction> {
    let d = lat.dim();
    let freqs: Vec<Vec<f64>> = (0..d).map(|a| fft_freqs(lat.shape[a], lat.spacing[a])).collect();
    let spatial_len = family.target.len();
    let values: Vec<Complex64> = (0..lat.len())
        .into_par_iter()
        .map(|f| {
            let mut idx = vec![0; d];
            lat.unflat(f, &mut idx);
            let tau = freqs[0][idx[0]];
            let xi: Vec<f64> = (1..d).map(|a| freqs[a][idx[a]]).collect();
            let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            if tau.abs() >= r {
                return Complex64::new(0.0, 0.0);
            }
            let s = f % spatial_len;
            let mut acc = Complex64::new(0.0, 0.0);
            for sign in [0.0, std::f64::consts::PI] {
                let sol = solve_omega(tau, &xi, &circle_param(2, sign)).expect("strictly inside the cone complement");
                acc += family.eval_omega(s, &sol.omega);
            }
            0.5 * acc
        })
        .collect();
    let n_data_nodes = values.iter().filter(|z| z.norm() > 0.0).count();
    let spectrum = SpectralField { source: lat.clone(), freqs, values, edge_leakage: 0.0 };
    let values = idft_lattice(&spectrum).into_iter().map(|z| z.re).collect();
    Ok(ScalarReconstruction { spectrum, values, n_data_nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_lattice_folds_back() {
        let t = Lattice::new(vec![4, 4], vec![-1.0, -1.0], vec![0.5, 0.5]).unwrap();
        let e = extended_lattice(&t, 1);
        assert_eq!(e.shape, vec![12, 12]);
        assert!((e.origin[0] + 3.0).abs() < 1e-15);
        let ones = vec![1.0; e.len()];
        assert!(fold(&e, &t, &ones).iter().all(|&x| x == 9.0));
    }
}
