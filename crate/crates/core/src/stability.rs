//! Divergence-constrained spectral reconstruction and the logarithmic
//! stability chain: the direction system `M(τ, ξ)`, the inversion constant
//! `C₄`, the strip harmonic measure and the `ρ`-balancing bound.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slice::{circle_param, solve_omega};

/// `(n+1) × (n+1)` system whose first `n` rows are `(1, ω^{(k)})` for the
/// vertices of a regular polygon on a maximal circle of the solution sphere,
/// and whose last row is `(τ, ξ)/√(τ² + |ξ|²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSystem {
    pub tau: f64,
    pub xi: Vec<f64>,
    pub omegas: Vec<Vec<f64>>,
    /// Row-major matrix entries.
    pub m: Vec<Vec<f64>>,
    pub det_abs: f64,
    /// `n`-dimensional volume spanned by the rows `(1, ω^{(k)})` at this point.
    pub volume: f64,
}

impl DirectionSystem {
    /// Matrix as a nalgebra value.
    pub fn matrix(&self) -> DMatrix<f64> {
        let k = self.m.len();
        DMatrix::from_row_iterator(k, k, self.m.iter().flatten().cloned())
    }
}

fn polygon_omegas(tau: f64, xi: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = xi.len();
    (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            solve_omega(tau, xi, &circle_param(n, theta)).map(|s| s.omega)
        })
        .collect()
}

fn gram_volume(rows: &[Vec<f64>]) -> f64 {
    let k = rows.len();
    let g = DMatrix::from_fn(k, k, |i, j| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>());
    g.determinant().max(0.0).sqrt()
}

fn assemble(tau: f64, xi: &[f64]) -> Result<DirectionSystem> {
    let n = xi.len();
    let omegas = polygon_omegas(tau, xi)?;
    let mut m: Vec<Vec<f64>> = omegas.iter().map(|w| std::iter::once(1.0).chain(w.iter().cloned()).collect()).collect();
    let volume = gram_volume(&m);
    let r = (tau * tau + xi.iter().map(|x| x * x).sum::<f64>()).sqrt();
    m.push(std::iter::once(tau / r).chain(xi.iter().map(|x| x / r)).collect());
    let det_abs = DMatrix::from_row_iterator(n + 1, n + 1, m.iter().flatten().cloned()).determinant().abs();
    Ok(DirectionSystem { tau, xi: xi.to_vec(), omegas, m, det_abs, volume })
}

/// Polygon volume at the reference point `τ = 0`, `ξ = e_n`.
pub fn reference_volume(n: usize) -> Result<f64> {
    let mut xi = vec![0.0; n];
    xi[n - 1] = 1.0;
    Ok(assemble(0.0, &xi)?.volume)
}

/// Builds `M(τ, ξ)` in the working region `|τ| ≤ |ξ|/2`.
///
/// Near-singular systems (`|det M| < 1e-3 × reference volume`) are rejected;
/// this is always the case for `n ≥ 4`, where a planar polygon cannot span
/// an `n`-dimensional family.
pub fn build_direction_system(tau: f64, xi: &[f64]) -> Result<DirectionSystem> {
    let n = xi.len();
    if n < 2 {
        return Err(Error::Domain("the direction system needs n ≥ 2".into()));
    }
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || tau.abs() > 0.5 * norm {
        return Err(Error::ConeRegion(format!("(τ, |ξ|) = ({tau}, {norm}) is outside |τ| ≤ |ξ|/2")));
    }
    let sys = assemble(tau, xi)?;
    let floor = 1e-3 * reference_volume(n)?;
    if sys.det_abs < floor || sys.det_abs < 1e-12 {
        return Err(Error::Conditioning { det: sys.det_abs, floor });
    }
    Ok(sys)
}

fn solve_complex(m: &DMatrix<f64>, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let lu = m.clone().lu();
    let re = DVector::from_iterator(rhs.len(), rhs.iter().map(|z| z.re));
    let im = DVector::from_iterator(rhs.len(), rhs.iter().map(|z| z.im));
    let floor = 0.0;
    let xr = lu.solve(&re).ok_or(Error::Conditioning { det: 0.0, floor })?;
    let xi = lu.solve(&im).ok_or(Error::Conditioning { det: 0.0, floor })?;
    Ok(xr.iter().zip(xi.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect())
}

/// Solves `M·(Â₀, …, Â_n) = (G(ξ; ω^{(1)}), …, G(ξ; ω^{(n)}), 0)`.
///
/// With `g_mirror = Some(G(−ξ; ω^{(k)}))` the solution is averaged with the
/// conjugate of the solve at `(−τ, −ξ)`, which enforces Hermitian symmetry
/// for real potentials (the polygon directions coincide at `±(τ, ξ)`).
pub fn reconstruct_spectrum(g: &[Complex64], g_mirror: Option<&[Complex64]>, tau: f64, xi: &[f64]) -> Result<Vec<Complex64>> {
    let sys = build_direction_system(tau, xi)?;
    reconstruct_with(&sys, g, g_mirror)
}

/// [`reconstruct_spectrum`] with a prebuilt system.
pub fn reconstruct_with(sys: &DirectionSystem, g: &[Complex64], g_mirror: Option<&[Complex64]>) -> Result<Vec<Complex64>> {
    let n = sys.xi.len();
    if g.len() != n || g_mirror.is_some_and(|h| h.len() != n) {
        return Err(Error::ShapeMismatch(format!("expected {n} ray values per frequency")));
    }
    let m = sys.matrix();
    let rhs: Vec<Complex64> = g.iter().cloned().chain(std::iter::once(Complex64::new(0.0, 0.0))).collect();
    let x = solve_complex(&m, &rhs)?;
    let Some(h) = g_mirror else { return Ok(x) };
    let mut mm = m.clone();
    for c in 0..=n {
        mm[(n, c)] = -mm[(n, c)];
    }
    let rhs_m: Vec<Complex64> = h.iter().cloned().chain(std::iter::once(Complex64::new(0.0, 0.0))).collect();
    let y = solve_complex(&mm, &rhs_m)?;
    Ok(x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b.conj())).collect())
}

/// Inversion constant `C₄ = (α/2)/sin(α/2)` for `0 ≤ α < 2π` (`C₄ = 1` at `α = 0`).
pub fn c4(alpha: f64) -> Result<f64> {
    if !(0.0..2.0 * std::f64::consts::PI).contains(&alpha) {
        return Err(Error::Regime(format!("α = {alpha} must satisfy 0 ≤ α < 2π")));
    }
    Ok(if alpha == 0.0 { 1.0 } else { (alpha / 2.0) / (alpha / 2.0).sin() })
}

/// Certified bounds `|β| ≤ C₄ |e^{iβ} − 1|` for ray integrals `|β| ≤ α`.
pub fn ray_bound_from_exp(exp_values: &[Complex64], alpha: f64) -> Result<Vec<f64>> {
    let c = c4(alpha)?;
    Ok(exp_values.iter().map(|z| c * z.norm()).collect())
}

/// Harmonic measure of the cut strip at `ζ = iζ₂`:
/// `ϖ = (2/π)(π/2 − arctan(ζ₂(e^{aπ/h} − 1)/(ζ₂² + e^{aπ/h})))`.
pub fn harmonic_measure(zeta2: f64, a: f64, h: f64) -> Result<f64> {
    if !(zeta2 > 0.0 && a > 0.0 && h > 0.0) {
        return Err(Error::Domain(format!("harmonic measure needs positive inputs, got ({zeta2}, {a}, {h})")));
    }
    let e = (a * std::f64::consts::PI / h).exp();
    let arg = zeta2 * (e - 1.0) / (zeta2 * zeta2 + e);
    Ok(2.0 / std::f64::consts::PI * (std::f64::consts::FRAC_PI_2 - arg.atan()))
}

/// Infimum over `ζ₂ > 0` of [`harmonic_measure`], attained at `ζ₂ = e^{aπ/(2h)}`.
pub fn harmonic_measure_infimum(a: f64, h: f64) -> Result<(f64, f64)> {
    let z = (a * std::f64::consts::PI / (2.0 * h)).exp();
    Ok((z, harmonic_measure(z, a, h)?))
}

/// Inputs of the stability bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityInputs {
    /// Operator-norm proxy of `Λ₁ − Λ₂`.
    pub dtn_gap: f64,
    /// Supremum of `|ray transforms|` over the probe set.
    pub alpha: f64,
    pub n: usize,
    /// Support radius of the potentials.
    pub radius: f64,
    /// Constant `C` inside the logarithm.
    pub c: f64,
    /// Prefactor `C(Ω, n)`.
    pub c_omega: f64,
    /// Largest admissible gap; `None` means `C/e`.
    pub gap_max: Option<f64>,
}

impl StabilityInputs {
    /// Inputs with unit constants.
    pub fn new(dtn_gap: f64, n: usize) -> Self {
        Self { dtn_gap, alpha: 0.0, n, radius: 1.0, c: 1.0, c_omega: 1.0, gap_max: None }
    }
}

/// Result of [`stability_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Sup-norm bound `C(Ω,n)/log(C/gap)`.
    pub bound: f64,
    /// Balancing radius solving `2 log(C/gap) = (3n+5) log ρ + 2πρ`.
    pub rho: f64,
    /// Absolute residual of the balancing identity at `rho`.
    pub balancing_residual: f64,
    /// `C(Ω,n)[1/ρ + ρ^{n+2/3} e^{2πρ/3} gap^{2/3}]` at the balancing radius.
    pub chain_value: f64,
    /// Inversion constant for the given `α`.
    pub c4: f64,
}

/// Solves `(3n+5) log ρ + 2πρ = rhs` by bisection (the left side is increasing).
pub fn solve_balancing(n: usize, rhs: f64) -> f64 {
    let k = (3 * n + 5) as f64;
    let f = |r: f64| k * r.ln() + 2.0 * std::f64::consts::PI * r - rhs;
    let (mut lo, mut hi) = (1.0, 1.0);
    while f(lo) > 0.0 {
        lo *= 0.5;
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Logarithmic sup-norm bound on the potential difference.
pub fn stability_bound(inputs: &StabilityInputs) -> Result<StabilityReport> {
    let c4 = c4(inputs.alpha)?;
    let gap = inputs.dtn_gap;
    if gap.is_nan() || gap < 0.0 {
        return Err(Error::Domain(format!("gap {gap} must be nonnegative")));
    }
    if gap == 0.0 {
        return Ok(StabilityReport { bound: 0.0, rho: f64::INFINITY, balancing_residual: 0.0, chain_value: 0.0, c4 });
    }
    let gap_max = inputs.gap_max.unwrap_or(inputs.c / std::f64::consts::E);
    if gap >= gap_max {
        return Err(Error::Regime(format!("gap {gap:.3e} is not below {gap_max:.3e}")));
    }
    let n = inputs.n;
    let log_ratio = (inputs.c / gap).ln();
    let rhs = 2.0 * log_ratio;
    let rho = solve_balancing(n, rhs);
    let balancing_residual = ((3 * n + 5) as f64 * rho.ln() + 2.0 * std::f64::consts::PI * rho - rhs).abs();
    let tail = 1.0 / rho;
    let cone = rho.powf(n as f64 + 2.0 / 3.0) * (2.0 * rho * std::f64::consts::PI / 3.0).exp() * gap.powf(2.0 / 3.0);
    Ok(StabilityReport {
        bound: inputs.c_omega / log_ratio,
        rho,
        balancing_residual,
        chain_value: inputs.c_omega * (tail + cone),
        c4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n2_volume_closed_form() {
        let sys = build_direction_system(0.3, &[1.0, 0.4]).unwrap();
        let c = 0.3 / (1.0f64 + 0.16).sqrt();
        assert!((sys.volume - 2.0 * (1.0 - c.powi(4)).sqrt()).abs() < 1e-12);
        assert!((sys.det_abs - sys.volume).abs() < 1e-12);
    }

    #[test]
    fn n4_is_singular() {
        assert!(matches!(build_direction_system(0.0, &[0.0, 0.0, 0.0, 1.0]), Err(Error::Conditioning { .. })));
    }
}
