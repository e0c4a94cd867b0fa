//! Recovery of the gauge function `φ` with `𝒜 = ∇_{t,x} φ` from a potential
//! whose light-ray transforms vanish.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{gradient, same_grid, spatial_radius, ScalarField, VectorPotential};
use crate::ray::{ray_transform_with, LightRay, RayOptions};
use crate::spectral::{dft_real, idft_lattice, SpectralField};

/// Settings of the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeOptions {
    /// Number of random probe rays (at least 50).
    pub n_probes: usize,
    /// Seed of the probe-ray generator.
    pub seed: u64,
    /// Probe tolerance relative to `‖𝒜‖_∞ × ray length`.
    pub tol_ray_rel: f64,
    /// Frequencies with `|w|` below this are zeroed; `None` means one frequency step.
    pub w_min: Option<f64>,
    pub ray: RayOptions,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        Self { n_probes: 64, seed: 0, tol_ray_rel: 1e-6, w_min: None, ray: RayOptions::default() }
    }
}

/// Residuals of a candidate gauge pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeResidual {
    /// `max |A_j − ∂_j φ|` per component (time first).
    pub component_max: Vec<f64>,
    /// `max |φ|` over nodes with `|x| ≥ R`.
    pub support_leak: f64,
    /// `max |φ|` over the grid.
    pub phi_max: f64,
}

impl GaugeResidual {
    /// Largest component residual.
    pub fn max(&self) -> f64 {
        self.component_max.iter().cloned().fold(0.0, f64::max)
    }
}

/// Output of [`reconstruct_phi`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeCandidate {
    pub phi: ScalarField,
    /// Hermitian-symmetrized `Φ` on the space-time frequency lattice.
    pub spectral_phi: SpectralField,
    pub residual: GaugeResidual,
    /// Largest `|ray transform|` over the probe rays.
    pub max_probe_ray: f64,
}

/// Least-squares gauge spectrum `Φ = −i (w·𝒜̂)/|w|²`, `w = (τ, ξ)`, zeroed for `|w| < w_min`.
pub fn phi_spectral(a_hat: &[SpectralField], w_min: f64) -> Result<SpectralField> {
    let first = a_hat.first().ok_or_else(|| Error::ShapeMismatch("no spectral components".into()))?;
    let d = first.source.dim();
    if a_hat.len() != d || a_hat.iter().any(|s| s.source != first.source) {
        return Err(Error::ShapeMismatch("need one spectrum per space-time axis on a shared lattice".into()));
    }
    let mut w = vec![0.0; d];
    let mut out = first.clone();
    out.edge_leakage = a_hat.iter().map(|s| s.edge_leakage).fold(0.0, f64::max);
    for f in 0..out.values.len() {
        first.freq_of(f, &mut w);
        let w2: f64 = w.iter().map(|x| x * x).sum();
        out.values[f] = if w2 == 0.0 || w2.sqrt() < w_min {
            Complex64::new(0.0, 0.0)
        } else {
            let dot: Complex64 = w.iter().zip(a_hat).map(|(wj, s)| *wj * s.values[f]).sum();
            -Complex64::i() * dot / w2
        };
    }
    Ok(out)
}

/// Replaces `Φ(w)` by `(Φ(w) + conj Φ(−w))/2`.
pub fn hermitian_symmetrize(spec: &mut SpectralField) {
    let old = spec.values.clone();
    for f in 0..old.len() {
        let g = spec.mirror(f);
        spec.values[f] = 0.5 * (old[f] + old[g].conj());
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 0.1 && r <= 1.0 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Seeded light rays whose spatial base points lie in the support ball (clipped to the box).
pub fn probe_rays(a: &VectorPotential, count: usize, seed: u64) -> Vec<LightRay> {
    let grid = a.grid();
    let lat = grid.lattice();
    let n = grid.n_space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = a.support_radius();
    (0..count)
        .map(|_| {
            let mut base = vec![rng.gen_range(lat.origin[0]..lat.upper(0))];
            for k in 1..=n {
                let lo = lat.origin[k].max(-r);
                let hi = lat.upper(k).min(r);
                base.push(if hi > lo { rng.gen_range(lo..hi) } else { 0.5 * (lat.origin[k] + lat.upper(k)) });
            }
            LightRay::new(base, unit_direction(&mut rng, n)).expect("normalized direction")
        })
        .collect()
}

/// Per-component residual `A − ∇φ` and support leakage of `φ`.
pub fn verify_gauge_pair(a: &VectorPotential, phi: &ScalarField) -> Result<GaugeResidual> {
    same_grid(a.grid(), phi.grid())?;
    let grad = gradient(phi);
    let component_max = a
        .components()
        .iter()
        .zip(grad.components())
        .map(|(x, y)| x.iter().zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs())))
        .collect();
    let r = a.support_radius();
    let support_leak = phi
        .values()
        .iter()
        .enumerate()
        .filter(|&(f, _)| spatial_radius(a.grid(), f) >= r)
        .fold(0.0f64, |m, (_, x)| m.max(x.abs()));
    Ok(GaugeResidual { component_max, support_leak, phi_max: phi.max_abs() })
}

/// Recovers `φ` (normalized to vanish outside the support ball) from a pure-gauge potential.
///
/// Probe rays are checked first; a potential with a non-vanishing probe
/// transform is refused with [`Error::NotAGauge`].
pub fn reconstruct_phi(a: &VectorPotential, opts: &GaugeOptions) -> Result<GaugeCandidate> {
    if opts.n_probes < 50 {
        return Err(Error::Domain(format!("at least 50 probe rays are required, got {}", opts.n_probes)));
    }
    let grid = a.grid();
    let lat = grid.lattice();
    let scale = a.max_abs();
    let mut max_ray = 0.0f64;
    let mut max_len = 0.0f64;
    for ray in probe_rays(a, opts.n_probes, opts.seed) {
        let r = ray_transform_with(a, &ray, &opts.ray)?;
        max_ray = max_ray.max(r.value.abs());
        max_len = max_len.max(r.length);
    }
    let tol = opts.tol_ray_rel * scale * max_len;
    if max_ray > tol {
        return Err(Error::NotAGauge { max_ray, tol });
    }

    let spectra: Vec<SpectralField> = a.components().iter().map(|c| dft_real(lat, c)).collect();
    let step = lat.shape.iter().zip(&lat.spacing).map(|(&n, h)| 2.0 * std::f64::consts::PI / (n as f64 * h)).fold(f64::INFINITY, f64::min);
    let mut spectral_phi = phi_spectral(&spectra, opts.w_min.unwrap_or(step))?;
    hermitian_symmetrize(&mut spectral_phi);
    let mut values: Vec<f64> = idft_lattice(&spectral_phi).into_iter().map(|z| z.re).collect();

    let r = a.support_radius();
    let outside: Vec<f64> = (0..values.len()).filter(|&f| spatial_radius(grid, f) >= r).map(|f| values[f]).collect();
    let offset = if outside.is_empty() {
        0.0
    } else {
        outside.iter().sum::<f64>() / outside.len() as f64
    };
    values.iter_mut().for_each(|x| *x -= offset);
    let phi = ScalarField::new(grid.clone(), values, r)?;
    let residual = verify_gauge_pair(a, &phi)?;
    Ok(GaugeCandidate { phi, spectral_phi, residual, max_probe_ray: max_ray })
}
