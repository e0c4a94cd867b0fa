//! Explicit leapfrog solver for `L u = 0` on a rectangle with Dirichlet data,
//! Dirichlet-to-Neumann traces, geometric-optics solutions, the Green's-formula
//! check and the DtN gap proxy.
//!
//! Expanding the operator gives
//!
//! `u_tt = Δu − 2iA₀u_t + 2iA·∇u + (−i∂_tA₀ + i div A + A₀² − |A|² + V) u − F`
//!
//! for `L u = F`. The `A₀u_t` term is discretized by a central difference, so
//! each step solves a pointwise linear equation for the new level.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::smooth_step;
use crate::error::{Error, Result};
use crate::field::{derivative, PotentialPair, VectorPotential};
use crate::grid::{Lattice, SpaceTimeGrid};
use crate::interp::{Interp, Sampler};
use crate::ray::{partial_ray_integral, RayOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Spatial flat indices of the nodes on the boundary of the box, ascending.
pub fn lateral_nodes(spatial: &Lattice) -> Vec<usize> {
    let mut idx = vec![0; spatial.dim()];
    (0..spatial.len())
        .filter(|&f| {
            spatial.unflat(f, &mut idx);
            idx.iter().zip(&spatial.shape).any(|(&i, &n)| i == 0 || i == n - 1)
        })
        .collect()
}

/// Dirichlet data on the lateral boundary, one value per boundary node and time level.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    grid: SpaceTimeGrid,
    nodes: Vec<usize>,
    values: Vec<Complex64>,
}

impl BoundaryData {
    /// Zero data.
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        let nodes = lateral_nodes(&grid.spatial());
        let values = vec![ZERO; nodes.len() * grid.nt()];
        Self { grid: grid.clone(), nodes, values }
    }

    /// Samples `f(t, x)` at every boundary node.
    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, &[f64]) -> Complex64) -> Self {
        let spatial = grid.spatial();
        let nodes = lateral_nodes(&spatial);
        let mut x = vec![0.0; spatial.dim()];
        let mut values = Vec::with_capacity(nodes.len() * grid.nt());
        for it in 0..grid.nt() {
            let t = grid.t(it);
            for &s in &nodes {
                spatial.point(s, &mut x);
                values.push(f(t, &x));
            }
        }
        Self { grid: grid.clone(), nodes, values }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    /// Spatial flat indices of the boundary nodes.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Values, time-major (`[it * nodes + k]`).
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Data at time level `it`.
    pub fn level(&self, it: usize) -> &[Complex64] {
        let m = self.nodes.len();
        &self.values[it * m..(it + 1) * m]
    }

    /// Multiplies all values by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|z| z * s).collect(), ..self.clone() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Everything needed for one simulation.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub potentials: PotentialPair,
    pub boundary: BoundaryData,
    /// Courant number bound (at most 0.5).
    pub cfl: f64,
    /// Optional right-hand side `F` of `L u = F`, one value per grid node.
    pub source: Option<Vec<Complex64>>,
    /// Optional solution values on the first two time levels (last two when marching backwards).
    pub initial: Option<[Vec<Complex64>; 2]>,
}

impl SimConfig {
    /// Homogeneous problem with zero initial data and Courant bound 0.5.
    pub fn new(potentials: PotentialPair, boundary: BoundaryData) -> Self {
        Self { potentials, boundary, cfl: 0.5, source: None, initial: None }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.potentials.grid()
    }
}

/// Complex solution on every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSolution {
    pub grid: SpaceTimeGrid,
    pub values: Vec<Complex64>,
}

impl SimSolution {
    /// Values on time level `it`.
    pub fn level(&self, it: usize) -> &[Complex64] {
        let m = self.grid.slice_len();
        &self.values[it * m..(it + 1) * m]
    }
}

/// Lower-order coefficients on the grid nodes.
struct Coefficients {
    a: Vec<Vec<f64>>,
    w: Vec<Complex64>,
}

fn coefficients(pair: &PotentialPair) -> Coefficients {
    let a = &pair.a;
    let grid = a.grid();
    let n = grid.n_space();
    let dt_a0 = derivative(grid, a.component(0), 0);
    let mut div = vec![0.0; grid.len()];
    for j in 1..=n {
        let d = derivative(grid, a.component(j), j);
        div.iter_mut().zip(d).for_each(|(s, x)| *s += x);
    }
    let v = pair.v.values();
    let w = (0..grid.len())
        .map(|f| {
            let a0 = a.component(0)[f];
            let a2: f64 = (1..=n).map(|j| a.component(j)[f].powi(2)).sum();
            Complex64::new(a0 * a0 - a2 + v[f], div[f] - dt_a0[f])
        })
        .collect();
    Coefficients { a: a.components().to_vec(), w }
}

fn validate(config: &SimConfig, backward: bool) -> Result<()> {
    let grid = config.grid();
    if grid.n_space() > 2 {
        return Err(Error::Domain("the solver supports n_space ∈ {1, 2}".into()));
    }
    if config.boundary.grid() != grid {
        return Err(Error::ShapeMismatch("boundary data and potentials live on different grids".into()));
    }
    if !(config.cfl > 0.0 && config.cfl <= 0.5) {
        return Err(Error::Domain(format!("Courant bound {} must lie in (0, 0.5]", config.cfl)));
    }
    let limit = config.cfl * grid.min_dx();
    if grid.dt() > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt: grid.dt(), limit });
    }
    if let Some(src) = &config.source {
        if src.len() != grid.len() {
            return Err(Error::ShapeMismatch("source must have one value per grid node".into()));
        }
    }
    match &config.initial {
        Some(init) => {
            if init.iter().any(|l| l.len() != grid.slice_len()) {
                return Err(Error::ShapeMismatch("initial levels must have one value per spatial node".into()));
            }
        }
        None => {
            let nt = grid.nt();
            let scale = config.boundary.max_abs();
            let levels = if backward { [nt - 1, nt - 2] } else { [0, 1] };
            let start = levels.iter().flat_map(|&l| config.boundary.level(l)).fold(0.0f64, |m, z| m.max(z.norm()));
            if start > 1e-10 * scale {
                return Err(Error::Domain(format!(
                    "boundary data is {start:.3e} on the {} two time levels where the solution starts at rest",
                    if backward { "last" } else { "first" }
                )));
            }
        }
    }
    Ok(())
}

/// `Δu + 2i A·∇u + W u` at interior node `f` of level `cur`.
#[inline]
fn spatial_operator(cur: &[Complex64], s: usize, f: usize, strides: &[usize], h: &[f64], co: &Coefficients) -> Complex64 {
    let mut acc = co.w[f] * cur[s];
    for (j, (&st, &hj)) in strides.iter().zip(h).enumerate() {
        let up = cur[s + st];
        let dn = cur[s - st];
        acc += (up - 2.0 * cur[s] + dn) / (hj * hj);
        acc += 2.0 * I * co.a[j + 1][f] * (up - dn) / (2.0 * hj);
    }
    acc
}

fn march(config: &SimConfig, backward: bool) -> Result<SimSolution> {
    validate(config, backward)?;
    let grid = config.grid();
    let spatial = grid.spatial();
    let m = grid.slice_len();
    let nt = grid.nt();
    let dt = grid.dt();
    let co = coefficients(&config.potentials);
    let sp_strides = spatial.strides();
    let h = spatial.spacing.clone();
    let interior: Vec<usize> = {
        let mut idx = vec![0; spatial.dim()];
        (0..m)
            .filter(|&s| {
                spatial.unflat(s, &mut idx);
                idx.iter().zip(&spatial.shape).all(|(&i, &n)| i > 0 && i < n - 1)
            })
            .collect()
    };
    let nodes = config.boundary.nodes();
    let mut values = vec![ZERO; grid.len()];
    let order: Vec<usize> = if backward { (0..nt).rev().collect() } else { (0..nt).collect() };
    for (step, &it) in order.iter().take(2).enumerate() {
        let level = &mut values[it * m..(it + 1) * m];
        if let Some(init) = &config.initial {
            level.copy_from_slice(&init[step]);
        }
        for (k, &s) in nodes.iter().enumerate() {
            level[s] = config.boundary.level(it)[k];
        }
    }
    let sign = if backward { -1.0 } else { 1.0 };
    let inv_dt2 = 1.0 / (dt * dt);
    for w in 2..nt {
        let (prev_it, cur_it, new_it) = (order[w - 2], order[w - 1], order[w]);
        let mut new = vec![ZERO; m];
        {
            let prev = &values[prev_it * m..(prev_it + 1) * m];
            let cur = &values[cur_it * m..(cur_it + 1) * m];
            for &s in &interior {
                let f = cur_it * m + s;
                let a0 = co.a[0][f];
                let mut rhs = (2.0 * cur[s] - prev[s]) * inv_dt2 + sign * I * a0 * prev[s] / dt;
                rhs += spatial_operator(cur, s, f, &sp_strides, &h, &co);
                if let Some(src) = &config.source {
                    rhs -= src[f];
                }
                new[s] = rhs / (inv_dt2 + sign * I * a0 / dt);
            }
        }
        for (k, &s) in nodes.iter().enumerate() {
            new[s] = config.boundary.level(new_it)[k];
        }
        if new.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Diverged { step: w });
        }
        values[new_it * m..(new_it + 1) * m].copy_from_slice(&new);
    }
    Ok(SimSolution { grid: grid.clone(), values })
}

/// Solves `L u = F` forward in time from rest with Dirichlet data on the lateral boundary.
pub fn run_forward(config: &SimConfig) -> Result<SimSolution> {
    march(config, false)
}

/// Solves the adjoint problem `L* v = F` backward in time from rest at the final time.
///
/// The adjoint operator uses the conjugated potentials; sampled potentials are
/// real, so the coefficients coincide with the forward ones.
pub fn run_backward(config: &SimConfig) -> Result<SimSolution> {
    march(config, true)
}

/// Boundary node of a trace with its outward face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceNode {
    /// Spatial flat index.
    pub flat: usize,
    /// Spatial axis normal to the face (0-based).
    pub axis: usize,
    /// Whether the face is the upper end of the axis.
    pub upper: bool,
    /// Quadrature weight of the node within its face.
    pub weight: f64,
}

/// Neumann-type data `(∂_ν + iA·ν)u` on every face of the lateral boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DtNTrace {
    pub grid: SpaceTimeGrid,
    pub nodes: Vec<TraceNode>,
    /// Time-major values (`[it * nodes + k]`).
    pub values: Vec<Complex64>,
}

impl DtNTrace {
    /// Discrete `L²(ℝ × ∂Ω)` norm.
    pub fn l2_norm(&self) -> f64 {
        let m = self.nodes.len();
        let sum: f64 = self.values.iter().enumerate().map(|(i, z)| z.norm_sqr() * self.nodes[i % m].weight).sum();
        (sum * self.grid.dt()).sqrt()
    }
}

/// Trace nodes: every (boundary node, face) incidence. Nodes on an edge of
/// the box appear once per face, and the weight is the trapezoidal weight of
/// the node within that face.
pub fn trace_nodes(spatial: &Lattice) -> Vec<TraceNode> {
    let d = spatial.dim();
    let mut idx = vec![0; d];
    let mut out = Vec::new();
    for axis in 0..d {
        for upper in [false, true] {
            for f in 0..spatial.len() {
                spatial.unflat(f, &mut idx);
                let end = if upper { spatial.shape[axis] - 1 } else { 0 };
                if idx[axis] != end {
                    continue;
                }
                let weight = (0..d)
                    .filter(|&b| b != axis)
                    .map(|b| {
                        let h = spatial.spacing[b];
                        if idx[b] == 0 || idx[b] == spatial.shape[b] - 1 {
                            0.5 * h
                        } else {
                            h
                        }
                    })
                    .product();
                out.push(TraceNode { flat: f, axis, upper, weight });
            }
        }
    }
    out
}

/// One-sided second-order normal derivative plus `iA·ν u` at every trace node and time level.
pub fn dtn_extract(u: &SimSolution, a: &VectorPotential) -> Result<DtNTrace> {
    if a.grid() != &u.grid {
        return Err(Error::ShapeMismatch("solution and potential grids differ".into()));
    }
    let grid = &u.grid;
    let spatial = grid.spatial();
    let strides = spatial.strides();
    let nodes = trace_nodes(&spatial);
    let m = grid.slice_len();
    let mut values = Vec::with_capacity(nodes.len() * grid.nt());
    for it in 0..grid.nt() {
        let level = u.level(it);
        for node in &nodes {
            let st = strides[node.axis];
            let h = spatial.spacing[node.axis];
            let s = node.flat;
            let (u0, u1, u2) = if node.upper {
                (level[s], level[s - st], level[s - 2 * st])
            } else {
                (level[s], level[s + st], level[s + 2 * st])
            };
            let dnu = (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * h);
            let nu = if node.upper { 1.0 } else { -1.0 };
            let an = a.component(node.axis + 1)[it * m + s] * nu;
            values.push(dnu + I * an * u0);
        }
    }
    Ok(DtNTrace { grid: grid.clone(), nodes, values })
}

/// Transverse amplitude `χ` of a geometric-optics solution: a Gaussian in the
/// projection of `(t, x)` onto the hyperplane orthogonal to `(1, ω)`, hence
/// constant along every light ray with direction `(1, ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiProfile {
    /// Space-time center (time first).
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

impl ChiProfile {
    /// `χ(p)` for direction `omega`.
    pub fn value(&self, p: &[f64], omega: &[f64]) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let d: Vec<f64> = p.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let along = 0.5 * (d[0] + omega.iter().zip(&d[1..]).map(|(w, x)| w * x).sum::<f64>());
        let mut q = (d[0] - along).powi(2);
        for (w, x) in omega.iter().zip(&d[1..]) {
            q += (x - along * w).powi(2);
        }
        self.amplitude * (-q / (self.width * self.width)).exp()
    }
}

/// Leading-order geometric-optics solution `u = e^{ik(t − ω·x)} v₀`,
/// `v₀ = χ e^{−iR₁}`, sampled on an evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GOAnsatz {
    pub grid: SpaceTimeGrid,
    pub omega: Vec<f64>,
    pub k: f64,
    pub chi: ChiProfile,
    pub chi_values: Vec<f64>,
    /// Partial ray integrals `R₁` per node.
    pub phase: Vec<f64>,
    pub v0: Vec<Complex64>,
}

impl GOAnsatz {
    /// `e^{ik(t − ω·x)} v₀` at every node.
    pub fn u_go(&self) -> Vec<Complex64> {
        let lat = self.grid.lattice();
        let mut p = vec![0.0; lat.dim()];
        (0..lat.len())
            .map(|f| {
                lat.point(f, &mut p);
                let psi = p[0] - self.omega.iter().zip(&p[1..]).map(|(w, x)| w * x).sum::<f64>();
                Complex64::from_polar(1.0, self.k * psi) * self.v0[f]
            })
            .collect()
    }

    /// Dirichlet data `u_GO` on the lateral boundary of the evaluation grid.
    pub fn boundary_data(&self) -> BoundaryData {
        let u = self.u_go();
        let m = self.grid.slice_len();
        let nodes = lateral_nodes(&self.grid.spatial());
        let values = (0..self.grid.nt()).flat_map(|it| nodes.iter().map(move |&s| (it, s))).map(|(it, s)| u[it * m + s]).collect();
        BoundaryData { grid: self.grid.clone(), nodes, values }
    }
}

/// Builds the ansatz on `grid`; the potentials may live on a different (larger) grid.
///
/// Requires `k · min(dx) ≤ 0.5`.
pub fn go_build(grid: &SpaceTimeGrid, pair: &PotentialPair, omega: &[f64], k: f64, chi: &ChiProfile, opts: &RayOptions) -> Result<GOAnsatz> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("frequency k = {k} must be positive")));
    }
    if k * grid.min_dx() > 0.5 {
        return Err(Error::Resolution(format!("k·dx = {:.3} exceeds 0.5", k * grid.min_dx())));
    }
    if omega.len() != grid.n_space() || pair.grid().n_space() != grid.n_space() {
        return Err(Error::ShapeMismatch("direction, evaluation grid and potentials must share n_space".into()));
    }
    let lat = grid.lattice();
    let results: Vec<Result<(f64, f64)>> = (0..lat.len())
        .into_par_iter()
        .map(|f| {
            let mut p = vec![0.0; lat.dim()];
            lat.point(f, &mut p);
            let c = chi.value(&p, omega);
            if c.abs() <= 1e-14 * chi.amplitude.abs() {
                return Ok((0.0, 0.0));
            }
            Ok((c, partial_ray_integral(&pair.a, &p, omega, opts)?.value))
        })
        .collect();
    let mut chi_values = Vec::with_capacity(lat.len());
    let mut phase = Vec::with_capacity(lat.len());
    for r in results {
        let (c, r1) = r?;
        chi_values.push(c);
        phase.push(r1);
    }
    let v0 = chi_values.iter().zip(&phase).map(|(&c, &r)| Complex64::from_polar(c, -r)).collect();
    Ok(GOAnsatz { grid: grid.clone(), omega: omega.to_vec(), k, chi: chi.clone(), chi_values, phase, v0 })
}

/// Potentials and their derivatives at the nodes of an evaluation grid.
struct PointCoefficients {
    a: Vec<Vec<f64>>,
    w: Vec<Complex64>,
}

fn coefficients_on(eval: &SpaceTimeGrid, pair: &PotentialPair) -> PointCoefficients {
    let co = coefficients(pair);
    if eval == pair.grid() {
        return PointCoefficients { a: co.a, w: co.w };
    }
    let src = pair.grid().lattice();
    let lat = eval.lattice();
    let w_re: Vec<f64> = co.w.iter().map(|z| z.re).collect();
    let w_im: Vec<f64> = co.w.iter().map(|z| z.im).collect();
    let sample = |data: &[f64]| -> Vec<f64> {
        let s = Sampler::new(src, data, Interp::Cubic);
        let mut p = vec![0.0; lat.dim()];
        (0..lat.len())
            .map(|f| {
                lat.point(f, &mut p);
                if src.contains(&p) {
                    s.eval(&p)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let a = co.a.iter().map(|c| sample(c)).collect();
    let w = sample(&w_re).into_iter().zip(sample(&w_im)).map(|(r, i)| Complex64::new(r, i)).collect();
    PointCoefficients { a, w }
}

/// Residual of a geometric-optics solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoResidual {
    /// `‖L u_GO‖ / (k ‖u_GO‖)` over interior nodes.
    pub normalized: f64,
    /// `‖𝓛 v₀‖ / ‖v₀‖` with `𝓛 = ∂_t + ω·∇ + i(A₀ + ω·A)`.
    pub transport: f64,
}

/// Applies `L` to `u_GO` through `L(e^{ikψ}v) = e^{ikψ}(L v − 2ik 𝓛 v)`:
/// the oscillatory factor is differentiated exactly and the finite
/// differences act on the smooth amplitude `v₀` only.
pub fn go_residual(ansatz: &GOAnsatz, pair: &PotentialPair) -> Result<GoResidual> {
    let grid = &ansatz.grid;
    let lat = grid.lattice();
    let d = lat.dim();
    let strides = lat.strides();
    let h = &lat.spacing;
    let co = coefficients_on(grid, pair);
    let v = &ansatz.v0;
    let mut idx = vec![0; d];
    let (mut res2, mut tr2, mut norm2) = (0.0, 0.0, 0.0);
    for f in 0..lat.len() {
        lat.unflat(f, &mut idx);
        if idx.iter().zip(&lat.shape).any(|(&i, &n)| i == 0 || i == n - 1) {
            continue;
        }
        let mut first = [ZERO; 4];
        let mut second = [ZERO; 4];
        for a in 0..d {
            let (up, dn) = (v[f + strides[a]], v[f - strides[a]]);
            first[a] = (up - dn) / (2.0 * h[a]);
            second[a] = (up - 2.0 * v[f] + dn) / (h[a] * h[a]);
        }
        let a0 = co.a[0][f];
        let mut lv = -second[0] - 2.0 * I * a0 * first[0] + co.w[f] * v[f];
        let mut transport = first[0] + I * a0 * v[f];
        for j in 1..d {
            let aj = co.a[j][f];
            let wj = ansatz.omega[j - 1];
            lv += second[j] + 2.0 * I * aj * first[j];
            transport += wj * first[j] + I * wj * aj * v[f];
        }
        let r = lv - 2.0 * I * ansatz.k * transport;
        res2 += r.norm_sqr();
        tr2 += transport.norm_sqr();
        norm2 += v[f].norm_sqr();
    }
    if norm2 == 0.0 {
        return Ok(GoResidual { normalized: 0.0, transport: 0.0 });
    }
    Ok(GoResidual { normalized: (res2 / norm2).sqrt() / ansatz.k, transport: (tr2 / norm2).sqrt() })
}

/// Both sides of the Green's formula and their relative defect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreensReport {
    /// `⟨Λ₁f, g⟩ − ⟨f, Λ₂*g⟩` on the lateral boundary.
    pub boundary: Complex64,
    /// Interior integral of the potential differences.
    pub volume: Complex64,
    /// `|boundary − volume| / max(|boundary|, |volume|, ε)`.
    pub defect: f64,
}

/// Evaluates the Green's formula for `u` (`L₁u = 0`, forward) and `v`
/// (`L₂*v = 0`, backward):
///
/// `⟨Λ₁f, g⟩ − ⟨f, Λ₂*g⟩ = Σ_μ r_μ [⟨a_μ(−i∂_μu), v⟩ + ⟨a_μu, −i∂_μv⟩ + ⟨(A₂μ² − A₁μ²)u, v⟩] + ⟨(V₂ − V₁)u, v⟩`
///
/// with `a = 𝒜⁽²⁾ − 𝒜⁽¹⁾`, `r₀ = 1`, `r_j = −1`, and `⟨p, q⟩ = ∫ p q̄`.
pub fn greens_residual(
    u: &SimSolution,
    v: &SimSolution,
    trace_u: &DtNTrace,
    trace_v: &DtNTrace,
    p1: &PotentialPair,
    p2: &PotentialPair,
) -> Result<GreensReport> {
    let grid = &u.grid;
    if &v.grid != grid || p1.grid() != grid || p2.grid() != grid || &trace_u.grid != grid || &trace_v.grid != grid {
        return Err(Error::ShapeMismatch("Green's formula inputs must share one grid".into()));
    }
    let m = grid.slice_len();
    let nk = trace_u.nodes.len();
    let mut boundary = ZERO;
    for it in 0..grid.nt() {
        for (k, node) in trace_u.nodes.iter().enumerate() {
            let f = it * m + node.flat;
            boundary += node.weight * (trace_u.values[it * nk + k] * v.values[f].conj() - u.values[f] * trace_v.values[it * nk + k].conj());
        }
    }
    boundary *= grid.dt();

    let lat = grid.lattice();
    let d = lat.dim();
    let strides = lat.strides();
    let h = &lat.spacing;
    let dv = lat.cell_volume();
    let a1 = p1.a.components();
    let a2 = p2.a.components();
    let (v1, v2) = (p1.v.values(), p2.v.values());
    let mut idx = vec![0; d];
    let mut volume = ZERO;
    for f in 0..lat.len() {
        lat.unflat(f, &mut idx);
        if idx.iter().zip(&lat.shape).any(|(&i, &n)| i == 0 || i == n - 1) {
            continue;
        }
        let (uf, vf) = (u.values[f], v.values[f]);
        let mut acc = (v2[f] - v1[f]) * uf * vf.conj();
        for mu in 0..d {
            let r = if mu == 0 { 1.0 } else { -1.0 };
            let a = a2[mu][f] - a1[mu][f];
            let quad = a2[mu][f].powi(2) - a1[mu][f].powi(2);
            if a == 0.0 && quad == 0.0 {
                continue;
            }
            let st = strides[mu];
            let du = -I * (u.values[f + st] - u.values[f - st]) / (2.0 * h[mu]);
            let dvv = -I * (v.values[f + st] - v.values[f - st]) / (2.0 * h[mu]);
            acc += r * (a * du * vf.conj() + a * uf * dvv.conj() + quad * uf * vf.conj());
        }
        volume += acc;
    }
    volume *= dv;
    let scale = boundary.norm().max(volume.norm()).max(1e-300);
    Ok(GreensReport { boundary, volume, defect: (boundary - volume).norm() / scale })
}

/// C∞ time window: rises on `[start, start + ramp]`, falls on `[end − ramp, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
    pub ramp: f64,
}

impl TimeWindow {
    pub fn value(&self, t: f64) -> f64 {
        smooth_step((t - self.start) / self.ramp).0 * smooth_step((self.end - t) / self.ramp).0
    }
}

/// Analytic boundary datum used to probe a DtN map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    /// Pulse `w(t − ω·x) e^{ik(t − ω·x)}`: an exact free wave.
    Wave { omega: Vec<f64>, k: f64, window: TimeWindow },
    /// Gaussian bump around a boundary point times a time window.
    Bump { center: Vec<f64>, width: f64, window: TimeWindow },
}

impl Probe {
    /// Value at `(t, x)`.
    pub fn value(&self, t: f64, x: &[f64]) -> Complex64 {
        match self {
            Probe::Wave { omega, k, window } => {
                let psi = t - omega.iter().zip(x).map(|(w, y)| w * y).sum::<f64>();
                Complex64::from_polar(window.value(psi), k * psi)
            }
            Probe::Bump { center, width, window } => {
                let r2: f64 = center.iter().zip(x).map(|(c, y)| (y - c).powi(2)).sum();
                Complex64::new(window.value(t) * (-r2 / (width * width)).exp(), 0.0)
            }
        }
    }

    /// Samples the probe on the lateral boundary of `grid`.
    pub fn sample(&self, grid: &SpaceTimeGrid) -> BoundaryData {
        BoundaryData::from_fn(grid, |t, x| self.value(t, x))
    }
}

/// Finite family of boundary probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFamily {
    pub probes: Vec<Probe>,
}

impl ProbeFamily {
    /// Eight or more probes: free pulses at several directions and
    /// frequencies that reach the box after the second time level, plus
    /// boundary bumps windowed to the first part of the time interval.
    pub fn standard(grid: &SpaceTimeGrid) -> Self {
        let lat = grid.lattice();
        let (t0, t1) = (lat.origin[0], lat.upper(0));
        let span = t1 - t0;
        let window = TimeWindow { start: t0 + 0.05 * span, end: t0 + 0.6 * span, ramp: 0.2 * span };
        let n = grid.n_space();
        let pulse = |omega: &[f64]| {
            let reach: f64 = omega.iter().enumerate().map(|(a, w)| (w * lat.origin[a + 1]).abs().max((w * lat.upper(a + 1)).abs())).sum();
            let start = t0 + reach + 0.05 * span;
            TimeWindow { start, end: start + 0.5 * span, ramp: 0.2 * span }
        };
        let mut probes = Vec::new();
        let angles: Vec<f64> = if n == 1 { vec![0.0, std::f64::consts::PI] } else { (0..4).map(|q| 0.3 + q as f64 * std::f64::consts::FRAC_PI_2).collect() };
        let ks: &[f64] = if n == 1 { &[2.0, 4.0, 7.0] } else { &[3.0, 6.0] };
        for &k in ks {
            for &th in &angles {
                let omega = if n == 1 { vec![th.cos().signum()] } else { vec![th.cos(), th.sin()] };
                let window = pulse(&omega);
                probes.push(Probe::Wave { omega, k, window });
            }
        }
        let lo: Vec<f64> = (1..=n).map(|a| lat.origin[a]).collect();
        let hi: Vec<f64> = (1..=n).map(|a| lat.upper(a)).collect();
        let width = 0.25 * (hi[0] - lo[0]);
        let mut centers = Vec::new();
        if n == 1 {
            centers.push(vec![lo[0]]);
            centers.push(vec![hi[0]]);
        } else {
            let mid = |a: usize, s: f64| lo[a] + s * (hi[a] - lo[a]);
            centers.push(vec![lo[0], mid(1, 0.4)]);
            centers.push(vec![hi[0], mid(1, 0.6)]);
            centers.push(vec![mid(0, 0.3), lo[1]]);
            centers.push(vec![mid(0, 0.7), hi[1]]);
        }
        for c in centers {
            probes.push(Probe::Bump { center: c, width, window });
        }
        Self { probes }
    }
}

/// Discrete `H¹(ℝ × ∂Ω)` norm: values, time derivatives and tangential derivatives
/// along each face (faces of a rectangle are lines of nodes).
pub fn boundary_h1_norm(bd: &BoundaryData) -> f64 {
    let grid = bd.grid();
    let spatial = grid.spatial();
    let dt = grid.dt();
    let nodes = bd.nodes();
    let m = nodes.len();
    let ds: f64 = if spatial.dim() == 1 { 1.0 } else { spatial.spacing.iter().cloned().fold(f64::INFINITY, f64::min) };
    let mut sum = 0.0;
    for it in 0..grid.nt() {
        let lvl = bd.level(it);
        for k in 0..m {
            sum += lvl[k].norm_sqr() * dt * ds;
            if it + 1 < grid.nt() {
                sum += ((bd.level(it + 1)[k] - lvl[k]) / dt).norm_sqr() * dt * ds;
            }
        }
    }
    if spatial.dim() == 2 {
        let pos: std::collections::HashMap<usize, usize> = nodes.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        let strides = spatial.strides();
        let mut idx = vec![0; 2];
        for it in 0..grid.nt() {
            let lvl = bd.level(it);
            for (k, &s) in nodes.iter().enumerate() {
                spatial.unflat(s, &mut idx);
                for a in 0..2 {
                    let b = 1 - a;
                    let on_face = idx[b] == 0 || idx[b] == spatial.shape[b] - 1;
                    if on_face && idx[a] + 1 < spatial.shape[a] {
                        let q = pos[&(s + strides[a])];
                        let h = spatial.spacing[a];
                        sum += ((lvl[q] - lvl[k]) / h).norm_sqr() * dt * h;
                    }
                }
            }
        }
    }
    sum.sqrt()
}

/// Result of [`dtn_gap_proxy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `max_f ‖(Λ₁ − Λ₂) f‖_{L²}` over unit-`H¹` probes.
    pub proxy: f64,
    pub per_probe: Vec<f64>,
}

/// Integer refinement factor per axis from `coarse` to `fine` (same box).
fn refinement(coarse: &Lattice, fine: &Lattice) -> Result<Vec<usize>> {
    coarse
        .shape
        .iter()
        .zip(&fine.shape)
        .enumerate()
        .map(|(a, (&nc, &nf))| {
            let r = ((nf - 1) as f64 / (nc - 1) as f64).round() as usize;
            let ok = r >= 1
                && (nc - 1) * r == nf - 1
                && (coarse.origin[a] - fine.origin[a]).abs() <= 1e-12 * (1.0 + coarse.origin[a].abs())
                && (coarse.spacing[a] - r as f64 * fine.spacing[a]).abs() <= 1e-9 * coarse.spacing[a];
            if ok {
                Ok(r)
            } else {
                Err(Error::ShapeMismatch(format!("axis {a}: second grid does not refine the first by an integer factor")))
            }
        })
        .collect()
}

/// Lower bound for the `H¹ → L²` norm of `Λ₁ − Λ₂`: the largest trace
/// difference over probes normalized to unit discrete `H¹` norm on the first
/// grid. The second grid may refine the first by integer factors; traces are
/// compared at the coarse nodes.
pub fn dtn_gap_proxy(p1: &PotentialPair, p2: &PotentialPair, probes: &ProbeFamily, cfl: f64) -> Result<GapReport> {
    if probes.probes.len() < 8 {
        return Err(Error::Domain(format!("the probe family needs at least 8 members, got {}", probes.probes.len())));
    }
    let g1 = p1.grid();
    let g2 = p2.grid();
    if g1.n_space() != g2.n_space() {
        return Err(Error::ShapeMismatch("potential pairs have different n_space".into()));
    }
    let r = refinement(g1.lattice(), g2.lattice())?;
    let per_probe: Result<Vec<f64>> = probes
        .probes
        .iter()
        .map(|probe| {
            let b1 = probe.sample(g1);
            let norm = boundary_h1_norm(&b1);
            if norm == 0.0 {
                return Ok(0.0);
            }
            let b1 = b1.scaled(1.0 / norm);
            let b2 = probe.sample(g2).scaled(1.0 / norm);
            let mut c1 = SimConfig::new(p1.clone(), b1);
            c1.cfl = cfl;
            let mut c2 = SimConfig::new(p2.clone(), b2);
            c2.cfl = cfl;
            let t1 = dtn_extract(&run_forward(&c1)?, &p1.a)?;
            let t2 = dtn_extract(&run_forward(&c2)?, &p2.a)?;
            Ok(trace_difference(&t1, &t2, &r))
        })
        .collect();
    let per_probe = per_probe?;
    let proxy = per_probe.iter().cloned().fold(0.0, f64::max);
    Ok(GapReport { proxy, per_probe })
}

/// `‖t1 − t2‖_{L²}` on the nodes and time levels of `t1`.
fn trace_difference(t1: &DtNTrace, t2: &DtNTrace, r: &[usize]) -> f64 {
    let s1 = t1.grid.spatial();
    let s2 = t2.grid.spatial();
    let pos2: std::collections::HashMap<(usize, usize, bool), usize> = t2.nodes.iter().enumerate().map(|(k, n)| ((n.flat, n.axis, n.upper), k)).collect();
    let mut idx = vec![0; s1.dim()];
    let map: Vec<usize> = t1
        .nodes
        .iter()
        .map(|n| {
            s1.unflat(n.flat, &mut idx);
            let fine: Vec<usize> = idx.iter().zip(&r[1..]).map(|(i, q)| i * q).collect();
            pos2[&(s2.flat(&fine), n.axis, n.upper)]
        })
        .collect();
    let (n1, n2) = (t1.nodes.len(), t2.nodes.len());
    let mut sum = 0.0;
    for it in 0..t1.grid.nt() {
        let it2 = it * r[0];
        for (k, &k2) in map.iter().enumerate() {
            sum += t1.nodes[k].weight * (t1.values[it * n1 + k] - t2.values[it2 * n2 + k2]).norm_sqr();
        }
    }
    (sum * t1.grid.dt()).sqrt()
}
