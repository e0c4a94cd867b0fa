//! Fourier-slice analysis: ray data versus the space-time spectrum, the
//! direction solver `ω(τ, ξ)`, cone-complement support tests and the rank of
//! the family `{(1, ω)}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorPotential;
use crate::ray::RayTransformField;
use crate::spectral::{dft_real, fft_axis, fft_freqs};

/// Solution of `τ + ω·ξ = 0` with `|ω| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaSolution {
    pub tau: f64,
    pub xi: Vec<f64>,
    pub omega: Vec<f64>,
    /// Point on `S^{n−2}` that selected the solution.
    pub parameter: Vec<f64>,
}

/// Deterministic orthonormal basis of `ξ^⊥` (Gram-Schmidt on the standard basis).
///
/// At each step the standard basis vector with the largest residual after
/// rejection is taken; ties go to the lower index.
pub fn perp_frame(xi: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = xi.len();
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ConeRegion("ξ = 0 has no direction solutions".into()));
    }
    let mut basis: Vec<Vec<f64>> = vec![xi.iter().map(|x| x / norm).collect()];
    let mut used = vec![false; n];
    for _ in 1..n {
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for (e, &u) in used.iter().enumerate() {
            if u {
                continue;
            }
            let mut v = vec![0.0; n];
            v[e] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
                }
            }
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().map_or(true, |(_, _, br)| r > *br) {
                best = Some((e, v, r));
            }
        }
        let (e, v, r) = best.expect("fewer frame vectors than dimensions");
        used[e] = true;
        basis.push(v.into_iter().map(|x| x / r).collect());
    }
    basis.remove(0);
    Ok(basis)
}

/// Point on the fixed maximal circle of `S^{n−2}` at angle `theta`.
///
/// For `n = 2` the sphere is `{±1}` and the sign of `cos θ` is used.
pub fn circle_param(n: usize, theta: f64) -> Vec<f64> {
    match n {
        0 | 1 => Vec::new(),
        2 => vec![if theta.cos() >= 0.0 { 1.0 } else { -1.0 }],
        _ => {
            let mut s = vec![0.0; n - 1];
            s[0] = theta.cos();
            s[1] = theta.sin();
            s
        }
    }
}

/// Solves `τ + ω·ξ = 0`, `|ω| = 1` for `|τ| < |ξ|`, choosing the component in
/// `ξ^⊥` through the frame of [`perp_frame`] and the parameter `s ∈ S^{n−2}`.
pub fn solve_omega(tau: f64, xi: &[f64], s_param: &[f64]) -> Result<OmegaSolution> {
    let n = xi.len();
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ConeRegion("ξ = 0 has no direction solutions".into()));
    }
    if tau.abs() >= norm {
        return Err(Error::ConeRegion(format!("|τ| = {} is not below |ξ| = {norm}", tau.abs())));
    }
    if n < 2 {
        return Err(Error::ConeRegion("no solutions with |τ| < |ξ| in one space dimension".into()));
    }
    if s_param.len() != n - 1 {
        return Err(Error::ShapeMismatch(format!("parameter must lie in S^{} (length {})", n - 2, n - 1)));
    }
    let s_norm = s_param.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (s_norm - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("parameter norm {s_norm} is not 1")));
    }
    let frame = perp_frame(xi)?;
    let c = tau / norm;
    let sq = (1.0 - c * c).sqrt();
    let mut omega: Vec<f64> = xi.iter().map(|x| -c * x / norm).collect();
    for (s, e) in s_param.iter().zip(&frame) {
        omega.iter_mut().zip(e).for_each(|(o, v)| *o += sq * s * v);
    }
    Ok(OmegaSolution { tau, xi: xi.to_vec(), omega, parameter: s_param.to_vec() })
}

/// Comparison of ray data with the direct space-time spectrum along the slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    /// `max |G − Â_ω| / max |Â_ω|` over the compared nodes.
    pub max_rel_mismatch: f64,
    pub max_abs_mismatch: f64,
    /// `max |Â_ω|` over the compared nodes.
    pub reference_max: f64,
    pub n_points: usize,
}

fn spatial_nyquist(h: &[f64]) -> f64 {
    h.iter().map(|h| std::f64::consts::PI / h).fold(f64::INFINITY, f64::min)
}

/// Spectrum of `(A₀ + ω·A)` at the slice points `(−ω·ξ_k, ξ_k)`.
///
/// Each time slice is transformed in space, then the time transform is
/// evaluated exactly at the off-grid `τ` (trigonometric interpolation of the
/// time DFT).
pub fn slice_spectrum(a: &VectorPotential, omega: &[f64], nodes: &[usize]) -> Vec<Complex64> {
    let grid = a.grid();
    let spatial = grid.spatial();
    let density = a.ray_density(omega);
    let m = grid.slice_len();
    let n = spatial.dim();
    let freqs: Vec<Vec<f64>> = (0..n).map(|k| fft_freqs(spatial.shape[k], spatial.spacing[k])).collect();
    let mut xi_nodes = Vec::with_capacity(nodes.len());
    let mut idx = vec![0; n];
    for &f in nodes {
        spatial.unflat(f, &mut idx);
        let xi: Vec<f64> = (0..n).map(|k| freqs[k][idx[k]]).collect();
        let tau = -omega.iter().zip(&xi).map(|(w, x)| w * x).sum::<f64>();
        let phase: f64 = xi.iter().zip(&spatial.origin).map(|(x, o)| x * o).sum();
        xi_nodes.push((tau, phase));
    }
    let vol = spatial.cell_volume() * grid.dt();
    let mut planner = FftPlanner::new();
    let mut acc = vec![Complex64::new(0.0, 0.0); nodes.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for it in 0..grid.nt() {
        let slice = &density[it * m..(it + 1) * m];
        if slice.iter().all(|&x| x == 0.0) {
            continue;
        }
        buf.iter_mut().zip(slice).for_each(|(b, &x)| *b = Complex64::new(x, 0.0));
        for axis in 0..n {
            fft_axis(&mut buf, &spatial.shape, axis, false, &mut planner);
        }
        let t = grid.t(it);
        for (k, (&f, &(tau, phase))) in nodes.iter().zip(&xi_nodes).enumerate() {
            acc[k] += buf[f] * Complex64::from_polar(vol, -(tau * t + phase));
        }
    }
    acc
}

/// Checks that the spatial transform of the ray field equals the space-time
/// transform of `A₀ + ω·A` at `τ = −ω·ξ`, for all `|ξ|` below half the spatial Nyquist.
pub fn slice_identity(ray_f: &RayTransformField, a: &VectorPotential) -> Result<SliceReport> {
    let spatial = a.grid().spatial();
    if ray_f.base != spatial {
        return Err(Error::ShapeMismatch("ray field base must be the potential's spatial lattice".into()));
    }
    let g = dft_real(&ray_f.base, &ray_f.values);
    let nyq = spatial_nyquist(&spatial.spacing);
    let nyq_t = std::f64::consts::PI / a.grid().dt();
    let g_max = g.max_abs();
    let n = spatial.dim();
    let mut xi = vec![0.0; n];
    let mut nodes = Vec::new();
    for f in 0..g.values.len() {
        g.freq_of(f, &mut xi);
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let edge = xi.iter().zip(&spatial.spacing).any(|(x, h)| x.abs() > 0.9 * std::f64::consts::PI / h);
        if edge && g.values[f].norm() > 1e-4 * g_max {
            return Err(Error::Resolution(format!("ray data reaches the spatial Nyquist frequency {nyq:.3e}")));
        }
        if r < 0.5 * nyq {
            let tau: f64 = ray_f.omega.iter().zip(&xi).map(|(w, x)| w * x).sum();
            if tau.abs() > nyq_t && g.values[f].norm() > 1e-4 * g_max {
                return Err(Error::Resolution(format!("slice frequency |τ| = {:.3e} exceeds the time Nyquist {nyq_t:.3e}", tau.abs())));
            }
            nodes.push(f);
        }
    }
    let direct = slice_spectrum(a, &ray_f.omega, &nodes);
    let mut worst = 0.0f64;
    let mut reference = 0.0f64;
    for (&f, d) in nodes.iter().zip(&direct) {
        worst = worst.max((g.values[f] - d).norm());
        reference = reference.max(d.norm());
    }
    let rel = if reference > 0.0 { worst / reference } else { worst };
    Ok(SliceReport { max_rel_mismatch: rel, max_abs_mismatch: worst, reference_max: reference, n_points: nodes.len() })
}

/// Magnitude of `(1, ω)·𝒜̂` over the half-cone region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSupportReport {
    /// `max |(1,ω)·𝒜̂(τ,ξ)| / max_j ‖𝒜̂_j‖_∞`.
    pub max_rel: f64,
    pub spectrum_max: f64,
    pub n_points: usize,
}

/// Sample parameters used by the cone test and the rank computation.
fn spread_params(n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let theta = if n == 2 {
                std::f64::consts::PI * k as f64
            } else {
                2.0 * std::f64::consts::PI * k as f64 / count as f64
            };
            circle_param(n, theta)
        })
        .collect()
}

/// Evaluates `(1, ω(τ,ξ))·𝒜̂(τ,ξ)` over nodes with `|τ| ≤ |ξ|/2`, `ξ ≠ 0`,
/// below half the Nyquist frequencies, for several parameters.
pub fn cone_support_test(a: &VectorPotential) -> ConeSupportReport {
    let grid = a.grid();
    let n = grid.n_space();
    let lat = grid.lattice();
    let spectra: Vec<_> = a.components().iter().map(|c| dft_real(lat, c)).collect();
    let spectrum_max = spectra.iter().map(|s| s.max_abs()).fold(0.0, f64::max);
    if n < 2 {
        return ConeSupportReport { max_rel: 0.0, spectrum_max, n_points: 0 };
    }
    let params = spread_params(n, if n == 2 { 2 } else { 4 });
    let nyq: Vec<f64> = lat.spacing.iter().map(|h| std::f64::consts::PI / h).collect();
    let mut w = vec![0.0; n + 1];
    let mut worst = 0.0f64;
    let mut count = 0;
    for f in 0..lat.len() {
        spectra[0].freq_of(f, &mut w);
        let r = w[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if r == 0.0 || w[0].abs() > 0.5 * r || w.iter().zip(&nyq).any(|(x, q)| x.abs() >= 0.5 * q) {
            continue;
        }
        for s in &params {
            let sol = solve_omega(w[0], &w[1..], s).expect("half-cone nodes are admissible");
            let mut z = spectra[0].values[f];
            for j in 0..n {
                z += sol.omega[j] * spectra[j + 1].values[f];
            }
            worst = worst.max(z.norm());
            count += 1;
        }
    }
    let max_rel = if spectrum_max > 0.0 { worst / spectrum_max } else { 0.0 };
    ConeSupportReport { max_rel, spectrum_max, n_points: count }
}

/// Dimension of `span{(1, ω(τ,ξ; s_k))}^⊥` for the given parameters.
pub fn perp_rank_with_params(tau: f64, xi: &[f64], params: &[Vec<f64>]) -> Result<usize> {
    let n = xi.len();
    let mut rows = Vec::with_capacity(params.len() * (n + 1));
    for s in params {
        let sol = solve_omega(tau, xi, s)?;
        rows.push(1.0);
        rows.extend_from_slice(&sol.omega);
    }
    let m = DMatrix::from_row_slice(params.len(), n + 1, &rows);
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
    Ok(n + 1 - rank)
}

/// Dimension of the orthogonal complement of `{(1, ω)}` sampled at
/// `n_samples` spread parameters (`n_samples ≥ n + 1`).
pub fn perp_rank(tau: f64, xi: &[f64], n_samples: usize) -> Result<usize> {
    let n = xi.len();
    if n_samples < n + 1 {
        return Err(Error::Domain(format!("need at least {} samples, got {n_samples}", n + 1)));
    }
    perp_rank_with_params(tau, xi, &spread_params(n, n_samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_orthonormal() {
        let xi = [0.3, -1.2, 0.7];
        let f = perp_frame(&xi).unwrap();
        assert_eq!(f.len(), 2);
        for (i, u) in f.iter().enumerate() {
            assert!(u.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-14);
            for (j, v) in f.iter().enumerate() {
                let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(solve_omega(0.0, &[0.0, 0.0], &[1.0]), Err(Error::ConeRegion(_))));
        assert!(matches!(solve_omega(2.0, &[1.0, 0.0], &[1.0]), Err(Error::ConeRegion(_))));
    }
}
