//! Light rays `{(t+s, x+sω)}` and integrals of sampled potentials along them:
//! full and partial light-ray transforms, ray fields on the `t = 0` slice, and
//! the exponential identity `e^{iβ} − 1`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorPotential};
use crate::grid::Lattice;
use crate::interp::{Interp, Sampler};

/// A light ray through `base` with unit spatial direction `omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightRay {
    /// Base point `(t, x)`.
    pub base: Vec<f64>,
    /// Unit spatial direction.
    pub omega: Vec<f64>,
}

impl LightRay {
    /// Builds a ray, requiring `|ω| = 1` within `1e-12`.
    pub fn new(base: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if base.len() != omega.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "base has {} coordinates, direction has {}",
                base.len(),
                omega.len()
            )));
        }
        let norm = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("|ω| = {norm} is not 1")));
        }
        Ok(Self { base, omega })
    }

    /// Space-time direction `(1, ω)`.
    pub fn direction(&self) -> Vec<f64> {
        let mut d = vec![1.0];
        d.extend_from_slice(&self.omega);
        d
    }

    /// Point at parameter `s`.
    pub fn at(&self, s: f64) -> Vec<f64> {
        let mut p = self.base.clone();
        p[0] += s;
        for (x, w) in p[1..].iter_mut().zip(&self.omega) {
            *x += s * w;
        }
        p
    }

    /// The same ray with its base moved by `s` along `(1, ω)`.
    pub fn shifted(&self, s: f64) -> LightRay {
        LightRay { base: self.at(s), omega: self.omega.clone() }
    }
}

/// Quadrature settings for ray integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayOptions {
    /// Interpolation order.
    pub interp: Interp,
    /// Step as a fraction of the smallest grid spacing.
    pub step_factor: f64,
    /// Integrand level (relative to the field maximum) tolerated where a ray leaves the grid.
    pub trunc_rel_tol: f64,
}

impl Default for RayOptions {
    fn default() -> Self {
        Self { interp: Interp::Cubic, step_factor: 0.5, trunc_rel_tol: 1e-8 }
    }
}

impl RayOptions {
    /// Default options with the given interpolation order.
    pub fn with_interp(interp: Interp) -> Self {
        Self { interp, ..Self::default() }
    }
}

/// Value of a ray integral with its Richardson error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayValue {
    /// Integral value.
    pub value: f64,
    /// `|I_h − I_{2h}| / 3`.
    pub error_estimate: f64,
    /// Length of the parameter interval actually integrated.
    pub length: f64,
}

impl RayValue {
    const ZERO: RayValue = RayValue { value: 0.0, error_estimate: 0.0, length: 0.0 };
}

/// Integrand description shared by the vector and scalar cases.
struct LineIntegrand<'a> {
    sampler: Sampler<'a>,
    support_radius: f64,
    field_max: f64,
}

impl<'a> LineIntegrand<'a> {
    fn vector(a: &'a VectorPotential, omega: &[f64], interp: Interp) -> Self {
        let mut w = vec![1.0];
        w.extend_from_slice(omega);
        let fields = a.components().iter().map(|c| c.as_slice()).collect();
        Self {
            sampler: Sampler::weighted(a.grid().lattice(), fields, w, interp),
            support_radius: a.support_radius(),
            field_max: a.max_abs(),
        }
    }

    fn scalar(lat: &'a Lattice, data: &'a [f64], support_radius: f64, field_max: f64, interp: Interp) -> Self {
        Self { sampler: Sampler::new(lat, data, interp), support_radius, field_max }
    }

    /// Integrates over `s ∈ [s_lo, s_hi]` along `base + s·(1, ω)`.
    fn integrate(&self, base: &[f64], omega: &[f64], s_lo: f64, s_hi: f64, opts: &RayOptions) -> Result<RayValue> {
        if self.sampler.is_zero() || self.field_max == 0.0 {
            return Ok(RayValue::ZERO);
        }
        let lat = self.sampler.lattice();
        let d = lat.dim();
        let dir = |a: usize| if a == 0 { 1.0 } else { omega[a - 1] };
        let (mut box_lo, mut box_hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for a in 0..d {
            let (lo, hi) = (lat.origin[a], lat.upper(a));
            let da = dir(a);
            if da == 0.0 {
                if base[a] < lo || base[a] > hi {
                    return Ok(RayValue::ZERO);
                }
            } else {
                let (p, q) = ((lo - base[a]) / da, (hi - base[a]) / da);
                box_lo = box_lo.max(p.min(q));
                box_hi = box_hi.min(p.max(q));
            }
        }
        let (mut sup_lo, mut sup_hi) = (f64::NEG_INFINITY, f64::INFINITY);
        if self.support_radius.is_finite() {
            let x0 = &base[1..];
            let b: f64 = x0.iter().zip(omega).map(|(x, w)| x * w).sum();
            let c: f64 = x0.iter().map(|x| x * x).sum::<f64>() - self.support_radius.powi(2);
            let disc = b * b - c;
            if disc <= 0.0 {
                return Ok(RayValue::ZERO);
            }
            let r = disc.sqrt();
            sup_lo = -b - r;
            sup_hi = -b + r;
        }
        let lo = s_lo.max(box_lo).max(sup_lo);
        let hi = s_hi.min(box_hi).min(sup_hi);
        if !(hi > lo) {
            return Ok(RayValue::ZERO);
        }
        let mut p = vec![0.0; d];
        let mut at = |s: f64| -> f64 {
            p[0] = base[0] + s;
            for a in 1..d {
                p[a] = base[a] + s * omega[a - 1];
            }
            self.sampler.eval(&p)
        };
        let tol = opts.trunc_rel_tol * self.field_max;
        for (end, clipped) in [(lo, box_lo > s_lo && box_lo > sup_lo), (hi, box_hi < s_hi && box_hi < sup_hi)] {
            if clipped {
                let tail = at(end).abs();
                if tail > tol {
                    return Err(Error::Truncation { tail, tol });
                }
            }
        }
        let len = hi - lo;
        let h_max = opts.step_factor * lat.min_spacing();
        let mut n = ((len / h_max).ceil() as usize).max(2);
        n += n % 2;
        let h = len / n as f64;
        let (mut sum_all, mut sum_even) = (0.0, 0.0);
        for i in 0..=n {
            let f = at(lo + i as f64 * h);
            let wt = if i == 0 || i == n { 0.5 } else { 1.0 };
            sum_all += wt * f;
            if i % 2 == 0 {
                sum_even += wt * f;
            }
        }
        let fine = h * sum_all;
        let coarse = 2.0 * h * sum_even;
        Ok(RayValue { value: fine, error_estimate: (fine - coarse).abs() / 3.0, length: len })
    }
}

fn check_ray(lat: &Lattice, ray: &LightRay) -> Result<()> {
    if ray.base.len() != lat.dim() {
        return Err(Error::ShapeMismatch(format!(
            "ray in {} dimensions, field in {}",
            ray.base.len(),
            lat.dim()
        )));
    }
    Ok(())
}

/// Light-ray transform `∫ (A₀ + Σ ω_j A_j)(t+s, x+sω) ds` with default options.
pub fn ray_transform(a: &VectorPotential, ray: &LightRay) -> Result<RayValue> {
    ray_transform_with(a, ray, &RayOptions::default())
}

/// Light-ray transform with explicit quadrature options.
pub fn ray_transform_with(a: &VectorPotential, ray: &LightRay, opts: &RayOptions) -> Result<RayValue> {
    check_ray(a.grid().lattice(), ray)?;
    LineIntegrand::vector(a, &ray.omega, opts.interp).integrate(&ray.base, &ray.omega, f64::NEG_INFINITY, f64::INFINITY, opts)
}

/// Scalar light-ray transform `∫ V(t+s, x+sω) ds`.
pub fn ray_transform_scalar(v: &ScalarField, ray: &LightRay, opts: &RayOptions) -> Result<RayValue> {
    let lat = v.grid().lattice();
    check_ray(lat, ray)?;
    LineIntegrand::scalar(lat, v.values(), v.support_radius(), v.max_abs(), opts.interp)
        .integrate(&ray.base, &ray.omega, f64::NEG_INFINITY, f64::INFINITY, opts)
}

/// Partial integral `∫_{−∞}^{½(t+ω·x)} (A₀ + Σω_jA_j)(t′+s, x′+sω) ds` where `(t′, x′)`
/// is the projection of `point` onto the hyperplane orthogonal to `(1, ω)`.
///
/// Equivalently the integral along the ray through `point` up to `point` itself.
pub fn partial_ray_integral(a: &VectorPotential, point: &[f64], omega: &[f64], opts: &RayOptions) -> Result<RayValue> {
    let ray = LightRay::new(point.to_vec(), omega.to_vec())?;
    check_ray(a.grid().lattice(), &ray)?;
    LineIntegrand::vector(a, omega, opts.interp).integrate(point, omega, f64::NEG_INFINITY, 0.0, opts)
}

/// `e^{iβ} − 1` for `β` the light-ray transform of `a` along `ray`.
pub fn exp_identity(a: &VectorPotential, ray: &LightRay) -> Result<Complex64> {
    let beta = ray_transform(a, ray)?.value;
    Ok(exp_minus_one(beta))
}

/// `e^{iβ} − 1`.
pub fn exp_minus_one(beta: f64) -> Complex64 {
    Complex64::new(beta.cos() - 1.0, beta.sin())
}

/// Ray transforms `F(0, x; ω)` at every node `x` of a spatial lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct RayTransformField {
    /// Spatial base lattice (the `t = 0` slice).
    pub base: Lattice,
    /// Direction shared by all rays.
    pub omega: Vec<f64>,
    /// One value per base node.
    pub values: Vec<f64>,
    /// Largest Richardson error estimate over the nodes.
    pub max_error_estimate: f64,
}

impl RayTransformField {
    /// Radius beyond which the field must vanish for potentials supported in `|x| ≤ r`:
    /// base points farther than `r` from the origin's line `{sω}` miss the support.
    pub fn vanishing_radius(support_radius: f64, time_reach: f64) -> f64 {
        support_radius + time_reach
    }
}

fn field_over_base(
    integrand: &LineIntegrand<'_>,
    omega: &[f64],
    base: &Lattice,
    opts: &RayOptions,
) -> Result<RayTransformField> {
    let n = base.dim();
    let results: Vec<Result<RayValue>> = (0..base.len())
        .into_par_iter()
        .map(|f| {
            let mut p = vec![0.0; n + 1];
            base.point(f, &mut p[1..]);
            integrand.integrate(&p, omega, f64::NEG_INFINITY, f64::INFINITY, opts)
        })
        .collect();
    let mut values = Vec::with_capacity(results.len());
    let mut worst = 0.0f64;
    for r in results {
        let r = r?;
        worst = worst.max(r.error_estimate);
        values.push(r.value);
    }
    Ok(RayTransformField { base: base.clone(), omega: omega.to_vec(), values, max_error_estimate: worst })
}

fn check_omega(omega: &[f64], n: usize, base: &Lattice) -> Result<()> {
    if omega.len() != n || base.dim() != n {
        return Err(Error::ShapeMismatch("direction and base lattice must match n_space".into()));
    }
    let norm = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("|ω| = {norm} is not 1")));
    }
    Ok(())
}

/// Ray field of a vector potential over a spatial base lattice at `t = 0`.
pub fn ray_field(a: &VectorPotential, omega: &[f64], base: &Lattice, opts: &RayOptions) -> Result<RayTransformField> {
    check_omega(omega, a.n_space(), base)?;
    let density = a.ray_density(omega);
    let lat = a.grid().lattice();
    let integrand = LineIntegrand::scalar(lat, &density, a.support_radius(), crate::field::max_abs(&density), opts.interp);
    field_over_base(&integrand, omega, base, opts)
}

/// Ray field of a scalar potential over a spatial base lattice at `t = 0`.
pub fn ray_field_scalar(v: &ScalarField, omega: &[f64], base: &Lattice, opts: &RayOptions) -> Result<RayTransformField> {
    check_omega(omega, v.grid().n_space(), base)?;
    let integrand = LineIntegrand::scalar(v.grid().lattice(), v.values(), v.support_radius(), v.max_abs(), opts.interp);
    field_over_base(&integrand, omega, base, opts)
}
