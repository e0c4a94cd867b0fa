//! Closed-form potentials used as test inputs: Gaussian bumps, exact gradients,
//! divergence-free curls and winding angle fields, plus nodewise sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorPotential};
use crate::grid::SpaceTimeGrid;

/// C∞ step: 0 for `u ≤ 0`, 1 for `u ≥ 1`. Returns `(S(u), S'(u))`.
pub fn smooth_step(u: f64) -> (f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0);
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    let s = a + b;
    let ds = a * b * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u))) / (s * s);
    (a / s, ds)
}

/// Radial cutoff equal to 1 for `r ≤ c/2` and 0 for `r ≥ c`. Returns `(χ, dχ/dr)`.
pub fn radial_cutoff(r: f64, c: f64) -> (f64, f64) {
    let (s, ds) = smooth_step((c - r) / (0.5 * c));
    (s, -ds * 2.0 / c)
}

/// Shape multiplying the Gaussian envelope of a [`Bump`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Plain Gaussian.
    #[default]
    Gaussian,
    /// Spatial Mexican hat `(1 − (2/n)|z|²)·e^{−|z|²}` with zero spatial mean.
    Hat,
}

/// Anisotropic Gaussian bump in `(t, x)` with an optional smooth spatial cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    /// Center, time first.
    pub center: Vec<f64>,
    /// Width per axis, time first: the envelope is `exp(−Σ ((y_a − c_a)/w_a)²)`.
    pub widths: Vec<f64>,
    /// Peak amplitude.
    pub amplitude: f64,
    /// Envelope shape.
    #[serde(default)]
    pub profile: Profile,
    /// Radius of the spatial cutoff around the spatial center; `None` leaves the bump untruncated.
    #[serde(default)]
    pub cutoff: Option<f64>,
}

impl Bump {
    /// Isotropic Gaussian bump of width `w` centered at `center`, cut off at `6w`.
    pub fn isotropic(center: Vec<f64>, w: f64, amplitude: f64) -> Self {
        let d = center.len();
        Self { center, widths: vec![w; d], amplitude, profile: Profile::Gaussian, cutoff: Some(6.0 * w) }
    }

    fn n_space(&self) -> usize {
        self.center.len() - 1
    }

    /// Radius of the spatial support around the origin (infinite without cutoff).
    pub fn support_radius(&self) -> f64 {
        match self.cutoff {
            Some(c) => self.center[1..].iter().map(|x| x * x).sum::<f64>().sqrt() + c,
            None => f64::INFINITY,
        }
    }

    /// Smallest resolution scale of the bump.
    pub fn min_width(&self) -> f64 {
        let w = self.widths.iter().cloned().fold(f64::INFINITY, f64::min);
        match self.cutoff {
            Some(c) => w.min(0.5 * c),
            None => w,
        }
    }

    /// Smallest ratio of a resolution scale to the grid spacing along the same axis.
    pub fn resolution_ratio(&self, spacing: &[f64]) -> f64 {
        let mut r = self.widths.iter().zip(spacing).map(|(w, h)| w / h).fold(f64::INFINITY, f64::min);
        if let Some(c) = self.cutoff {
            r = spacing[1..].iter().map(|h| 0.5 * c / h).fold(r, f64::min);
        }
        r
    }

    /// Value at the space-time point `y`.
    pub fn value(&self, y: &[f64]) -> f64 {
        let n = self.n_space() as f64;
        let mut q = 0.0;
        let mut qs = 0.0;
        let mut r2 = 0.0;
        for a in 0..y.len() {
            let d = (y[a] - self.center[a]) / self.widths[a];
            q += d * d;
            if a > 0 {
                qs += d * d;
                r2 += (y[a] - self.center[a]).powi(2);
            }
        }
        let chi = match self.cutoff {
            Some(c) => {
                let r = r2.sqrt();
                if r >= c {
                    return 0.0;
                }
                radial_cutoff(r, c).0
            }
            None => 1.0,
        };
        let p = match self.profile {
            Profile::Gaussian => 1.0,
            Profile::Hat => 1.0 - 2.0 * qs / n,
        };
        self.amplitude * p * (-q).exp() * chi
    }

    /// Space-time gradient at `y`, written into `out` (length `n + 1`).
    pub fn gradient(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n_space() as f64;
        let mut q = 0.0;
        let mut qs = 0.0;
        let mut r2 = 0.0;
        for a in 0..y.len() {
            let d = (y[a] - self.center[a]) / self.widths[a];
            q += d * d;
            if a > 0 {
                qs += d * d;
                r2 += (y[a] - self.center[a]).powi(2);
            }
        }
        let r = r2.sqrt();
        let (chi, dchi) = match self.cutoff {
            Some(c) if r >= c => {
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
            Some(c) => radial_cutoff(r, c),
            None => (1.0, 0.0),
        };
        let p = match self.profile {
            Profile::Gaussian => 1.0,
            Profile::Hat => 1.0 - 2.0 * qs / n,
        };
        let e = self.amplitude * (-q).exp();
        for a in 0..y.len() {
            let dy = y[a] - self.center[a];
            let w2 = self.widths[a] * self.widths[a];
            let dp = match self.profile {
                Profile::Hat if a > 0 => -4.0 * dy / (n * w2),
                _ => 0.0,
            };
            let dchi_a = if a > 0 && r > 0.0 { dchi * dy / r } else { 0.0 };
            out[a] = e * (dp * chi - 2.0 * dy / w2 * p * chi + p * dchi_a);
        }
    }

    /// Samples the bump as a scalar field.
    pub fn sample(&self, grid: &SpaceTimeGrid) -> Result<ScalarField> {
        check_dims(self.center.len(), grid)?;
        check_resolution(self.resolution_ratio(grid.spacing()))?;
        Ok(ScalarField::from_fn(grid, self.support_radius(), |p| self.value(p)))
    }
}

/// One rotation plane `(μ, ν)` of a divergence-free curl field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurlPlane {
    /// First axis (0 = time).
    pub mu: usize,
    /// Second axis.
    pub nu: usize,
    /// Weight of this plane.
    pub weight: f64,
}

/// Closed-form potential families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// Identically zero.
    Zero,
    /// `A_j = a_j·b`, `V = v·b` for one bump `b`.
    GaussianBump {
        /// Shared bump.
        bump: Bump,
        /// Amplitude per vector component (time first).
        a: Vec<f64>,
        /// Amplitude of the scalar potential.
        #[serde(default)]
        v: f64,
    },
    /// `A = ∇φ` for the bump `φ`, `V = 0`.
    GradientOfBump {
        /// The gauge function.
        bump: Bump,
    },
    /// `A_μ += w ∂_ν ψ`, `A_ν −= w ∂_μ ψ` per plane: divergence-free in closed form.
    DivergenceFreeCurl {
        /// Stream function `ψ`.
        bump: Bump,
        /// Rotation planes.
        planes: Vec<CurlPlane>,
    },
    /// Planar angle gradient `m ∇Θ` about `center` in the `(x₁, x₂)` plane with a mollified core.
    WindingTheta {
        /// Spatial center of the angle field.
        center: Vec<f64>,
        /// Winding integer (real-valued to allow non-integer tests).
        m: f64,
        /// Core radius below which the field vanishes.
        core_inner: f64,
        /// Radius beyond which the field equals `m ∇Θ` exactly.
        core_outer: f64,
    },
    /// Sum of several entries.
    CustomSum {
        /// Summands.
        terms: Vec<PotentialKind>,
    },
}

/// A catalog entry: a potential family plus its spatial dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPotentialSpec {
    /// Number of spatial dimensions.
    pub n_space: usize,
    /// The closed form.
    pub kind: PotentialKind,
}

/// Angle-gradient field `m η(r) (−(x₂−c₂), x₁−c₁)/r²` in the first two spatial axes.
pub fn winding_field(center: &[f64], m: f64, core: (f64, f64), x: &[f64]) -> (f64, f64) {
    let dx = x[0] - center[0];
    let dy = x[1] - center[1];
    let r2 = dx * dx + dy * dy;
    let r = r2.sqrt();
    if r <= core.0 {
        return (0.0, 0.0);
    }
    let eta = smooth_step((r - core.0) / (core.1 - core.0)).0;
    (-m * eta * dy / r2, m * eta * dx / r2)
}

impl PotentialKind {
    fn accumulate(&self, y: &[f64], a: &mut [f64], v: &mut f64, scratch: &mut [f64]) {
        match self {
            PotentialKind::Zero => {}
            PotentialKind::GaussianBump { bump, a: amps, v: va } => {
                let b = bump.value(y);
                for (o, s) in a.iter_mut().zip(amps) {
                    *o += s * b;
                }
                *v += va * b;
            }
            PotentialKind::GradientOfBump { bump } => {
                bump.gradient(y, scratch);
                for (o, g) in a.iter_mut().zip(scratch.iter()) {
                    *o += g;
                }
            }
            PotentialKind::DivergenceFreeCurl { bump, planes } => {
                bump.gradient(y, scratch);
                for p in planes {
                    a[p.mu] += p.weight * scratch[p.nu];
                    a[p.nu] -= p.weight * scratch[p.mu];
                }
            }
            PotentialKind::WindingTheta { center, m, core_inner, core_outer } => {
                let (ax, ay) = winding_field(center, *m, (*core_inner, *core_outer), &y[1..]);
                a[1] += ax;
                a[2] += ay;
            }
            PotentialKind::CustomSum { terms } => {
                for t in terms {
                    t.accumulate(y, a, v, scratch);
                }
            }
        }
    }

    fn support_radius(&self) -> f64 {
        match self {
            PotentialKind::Zero => 0.0,
            PotentialKind::GaussianBump { bump, .. }
            | PotentialKind::GradientOfBump { bump }
            | PotentialKind::DivergenceFreeCurl { bump, .. } => bump.support_radius(),
            PotentialKind::WindingTheta { .. } => f64::INFINITY,
            PotentialKind::CustomSum { terms } => {
                terms.iter().map(|t| t.support_radius()).fold(0.0, f64::max)
            }
        }
    }

    fn resolution_ratio(&self, spacing: &[f64]) -> f64 {
        match self {
            PotentialKind::Zero => f64::INFINITY,
            PotentialKind::GaussianBump { bump, .. }
            | PotentialKind::GradientOfBump { bump }
            | PotentialKind::DivergenceFreeCurl { bump, .. } => bump.resolution_ratio(spacing),
            PotentialKind::WindingTheta { core_inner, core_outer, .. } => {
                let h = spacing[1..].iter().cloned().fold(0.0, f64::max);
                (core_outer - core_inner) / h
            }
            PotentialKind::CustomSum { terms } => {
                terms.iter().map(|t| t.resolution_ratio(spacing)).fold(f64::INFINITY, f64::min)
            }
        }
    }

    fn validate(&self, n_space: usize) -> Result<()> {
        let d = n_space + 1;
        let bad = |m: String| Err(Error::Domain(m));
        match self {
            PotentialKind::Zero => Ok(()),
            PotentialKind::GaussianBump { bump, a, v } => {
                validate_bump(bump, d)?;
                if a.len() != d || a.iter().chain([v]).any(|x| !x.is_finite()) {
                    return bad(format!("gaussian_bump needs {d} finite amplitudes"));
                }
                Ok(())
            }
            PotentialKind::GradientOfBump { bump } => validate_bump(bump, d),
            PotentialKind::DivergenceFreeCurl { bump, planes } => {
                validate_bump(bump, d)?;
                if planes.iter().any(|p| p.mu >= d || p.nu >= d || p.mu == p.nu || !p.weight.is_finite()) {
                    return bad("curl plane axes must be distinct and < n_space + 1".into());
                }
                Ok(())
            }
            PotentialKind::WindingTheta { center, m, core_inner, core_outer } => {
                if n_space < 2 || center.len() != n_space {
                    return bad("winding_theta needs n_space ≥ 2 and a spatial center".into());
                }
                if !(0.0 <= *core_inner && core_inner < core_outer) || !m.is_finite() {
                    return bad("winding_theta core radii must satisfy 0 ≤ inner < outer".into());
                }
                Ok(())
            }
            PotentialKind::CustomSum { terms } => terms.iter().try_for_each(|t| t.validate(n_space)),
        }
    }
}

fn validate_bump(b: &Bump, d: usize) -> Result<()> {
    if b.center.len() != d || b.widths.len() != d {
        return Err(Error::Domain(format!("bump needs {d} center/width entries")));
    }
    if b.widths.iter().any(|w| !(*w > 0.0) || !w.is_finite())
        || b.center.iter().chain([&b.amplitude]).any(|x| !x.is_finite())
        || b.cutoff.map_or(false, |c| !(c > 0.0) || !c.is_finite())
    {
        return Err(Error::Domain("bump parameters must be finite with positive widths".into()));
    }
    Ok(())
}

fn check_dims(d: usize, grid: &SpaceTimeGrid) -> Result<()> {
    if d != grid.n_space() + 1 {
        return Err(Error::ShapeMismatch(format!(
            "closed form in {} dimensions sampled on a {}-dimensional grid",
            d,
            grid.n_space() + 1
        )));
    }
    Ok(())
}

fn check_resolution(ratio: f64) -> Result<()> {
    if ratio <= 2.0 {
        return Err(Error::Resolution(format!("smallest width is {ratio:.3} grid spacings along its axis (need > 2)")));
    }
    Ok(())
}

impl AnalyticPotentialSpec {
    /// Wraps a family after validating its parameters.
    pub fn new(n_space: usize, kind: PotentialKind) -> Result<Self> {
        kind.validate(n_space)?;
        Ok(Self { n_space, kind })
    }

    /// The zero potential.
    pub fn zero(n_space: usize) -> Self {
        Self { n_space, kind: PotentialKind::Zero }
    }

    /// Evaluates `(A₀..A_n, V)` at the space-time point `y`.
    pub fn eval(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let mut a = vec![0.0; self.n_space + 1];
        let mut scratch = vec![0.0; self.n_space + 1];
        let mut v = 0.0;
        self.kind.accumulate(y, &mut a, &mut v, &mut scratch);
        (a, v)
    }

    /// Spatial support radius around the origin.
    pub fn support_radius(&self) -> f64 {
        self.kind.support_radius()
    }

    /// Samples every component at the grid nodes.
    pub fn sample(&self, grid: &SpaceTimeGrid) -> Result<(VectorPotential, ScalarField)> {
        check_dims(self.n_space + 1, grid)?;
        self.kind.validate(self.n_space)?;
        check_resolution(self.kind.resolution_ratio(grid.spacing()))?;
        let d = self.n_space + 1;
        let len = grid.len();
        let mut comps = vec![vec![0.0; len]; d];
        let mut vvals = vec![0.0; len];
        let mut p = vec![0.0; d];
        let mut a = vec![0.0; d];
        let mut scratch = vec![0.0; d];
        for f in 0..len {
            grid.lattice().point(f, &mut p);
            a.iter_mut().for_each(|x| *x = 0.0);
            let mut v = 0.0;
            self.kind.accumulate(&p, &mut a, &mut v, &mut scratch);
            for j in 0..d {
                comps[j][f] = a[j];
            }
            vvals[f] = v;
        }
        let r = self.support_radius();
        Ok((VectorPotential::new(grid.clone(), comps, r)?, ScalarField::new(grid.clone(), vvals, r)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_step_limits_and_derivative() {
        assert_eq!(smooth_step(-0.1), (0.0, 0.0));
        assert_eq!(smooth_step(1.5), (1.0, 0.0));
        assert!((smooth_step(0.5).0 - 0.5).abs() < 1e-15);
        for &u in &[0.1, 0.3, 0.7, 0.95] {
            let h = 1e-6;
            let fd = (smooth_step(u + h).0 - smooth_step(u - h).0) / (2.0 * h);
            assert!((fd - smooth_step(u).1).abs() < 1e-6);
        }
    }

    #[test]
    fn bump_gradient_matches_finite_differences() {
        for profile in [Profile::Gaussian, Profile::Hat] {
            let b = Bump {
                center: vec![0.1, -0.2, 0.05],
                widths: vec![0.3, 0.25, 0.2],
                amplitude: 1.3,
                profile,
                cutoff: Some(0.9),
            };
            let y = [0.2, 0.2, -0.3];
            let mut g = [0.0; 3];
            b.gradient(&y, &mut g);
            for a in 0..3 {
                let h = 1e-6;
                let mut yp = y;
                let mut ym = y;
                yp[a] += h;
                ym[a] -= h;
                let fd = (b.value(&yp) - b.value(&ym)) / (2.0 * h);
                assert!((fd - g[a]).abs() < 1e-7, "{profile:?} axis {a}: {fd} vs {}", g[a]);
            }
        }
    }

    #[test]
    fn gaussian_peak_is_amplitude() {
        let spec = AnalyticPotentialSpec::new(
            2,
            PotentialKind::GaussianBump { bump: Bump::isotropic(vec![0.0; 3], 1.0, 1.0), a: vec![1.0, 0.0, 0.0], v: 0.0 },
        )
        .unwrap();
        assert_eq!(spec.eval(&[0.0, 0.0, 0.0]).0[0], 1.0);
    }
}
