//! Convex obstacles `ℝ × Ω_k` inside the domain: visibility of light rays,
//! planes through a point that miss every obstacle, closed loops made of
//! light-ray segments, loop integrals with winding detection, and the angle
//! fields `Θ_j` with the unimodular factor `C₀`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::catalog::winding_field;
use crate::error::{Error, Result};
use crate::field::{ComplexField, VectorPotential};
use crate::grid::SpaceTimeGrid;
use crate::interp::{Interp, Sampler};
use crate::ray::LightRay;

/// Half-space `normal · x ≤ offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Shape of a spatial obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObstacleKind {
    Ball { center: Vec<f64>, radius: f64 },
    Polytope { halfspaces: Vec<Halfspace> },
}

/// A closed convex body in space, extended trivially in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObstacleKind", into = "ObstacleKind")]
pub struct Obstacle {
    kind: ObstacleKind,
    vertices: Vec<Vec<f64>>,
}

impl TryFrom<ObstacleKind> for Obstacle {
    type Error = Error;
    fn try_from(kind: ObstacleKind) -> Result<Self> {
        match kind {
            ObstacleKind::Ball { center, radius } => Obstacle::ball(center, radius),
            ObstacleKind::Polytope { halfspaces } => Obstacle::polytope(halfspaces),
        }
    }
}

impl From<Obstacle> for ObstacleKind {
    fn from(o: Obstacle) -> Self {
        o.kind
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Solves the square system `rows · x = rhs` by Gaussian elimination with partial pivoting.
fn solve_small(rows: &[&[f64]], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let lu = m.lu();
    if lu.determinant().abs() < 1e-12 {
        return None;
    }
    lu.solve(&nalgebra::DVector::from_column_slice(rhs)).map(|x| x.iter().cloned().collect())
}

/// All `k`-element subsets of `0..n`.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    (k - 1..n).flat_map(|last| subsets(last, k - 1).into_iter().map(move |mut s| {
        s.push(last);
        s
    }))
    .collect()
}

impl Obstacle {
    /// Closed ball.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || center.is_empty() {
            return Err(Error::Geometry(format!("ball radius {radius} must be positive")));
        }
        Ok(Self { kind: ObstacleKind::Ball { center, radius }, vertices: vec![] })
    }

    /// Bounded convex polytope `{x : nᵢ·x ≤ oᵢ}`; normals need not be unit length.
    pub fn polytope(halfspaces: Vec<Halfspace>) -> Result<Self> {
        let dim = halfspaces.first().map(|h| h.normal.len()).unwrap_or(0);
        if dim == 0 || halfspaces.iter().any(|h| h.normal.len() != dim || norm(&h.normal) == 0.0) {
            return Err(Error::Geometry("half-spaces need nonzero normals of one dimension".into()));
        }
        let halfspaces: Vec<Halfspace> = halfspaces
            .into_iter()
            .map(|h| {
                let s = norm(&h.normal);
                Halfspace { normal: h.normal.iter().map(|x| x / s).collect(), offset: h.offset / s }
            })
            .collect();
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for set in subsets(halfspaces.len(), dim) {
            let rows: Vec<&[f64]> = set.iter().map(|&i| halfspaces[i].normal.as_slice()).collect();
            let rhs: Vec<f64> = set.iter().map(|&i| halfspaces[i].offset).collect();
            if let Some(x) = solve_small(&rows, &rhs) {
                let feasible = halfspaces.iter().all(|h| dot(&h.normal, &x) <= h.offset + 1e-10);
                if feasible && !vertices.iter().any(|v| norm(&sub(v, &x)) < 1e-10) {
                    vertices.push(x);
                }
            }
        }
        if vertices.len() < dim + 1 {
            return Err(Error::Geometry("polytope is empty, flat or unbounded".into()));
        }
        let centroid = centroid(&vertices);
        let bounded = (0..dim).all(|a| {
            let mut e = vec![0.0; dim];
            for s in [1.0, -1.0] {
                e[a] = s;
                if !halfspaces.iter().any(|h| dot(&h.normal, &e) > 1e-12) {
                    return false;
                }
            }
            true
        });
        let depth = halfspaces.iter().map(|h| h.offset - dot(&h.normal, &centroid)).fold(f64::INFINITY, f64::min);
        if !bounded || depth <= 1e-12 {
            return Err(Error::Geometry("polytope is unbounded or has empty interior".into()));
        }
        Ok(Self { kind: ObstacleKind::Polytope { halfspaces }, vertices })
    }

    pub fn kind(&self) -> &ObstacleKind {
        &self.kind
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        match &self.kind {
            ObstacleKind::Ball { center, .. } => center.len(),
            ObstacleKind::Polytope { halfspaces } => halfspaces[0].normal.len(),
        }
    }

    /// Center of the ball or centroid of the polytope vertices.
    pub fn center(&self) -> Vec<f64> {
        match &self.kind {
            ObstacleKind::Ball { center, .. } => center.clone(),
            ObstacleKind::Polytope { .. } => centroid(&self.vertices),
        }
    }

    /// Radius of the smallest ball about [`Obstacle::center`] containing the body.
    pub fn circumradius(&self) -> f64 {
        match &self.kind {
            ObstacleKind::Ball { radius, .. } => *radius,
            ObstacleKind::Polytope { .. } => {
                let c = self.center();
                self.vertices.iter().map(|v| norm(&sub(v, &c))).fold(0.0, f64::max)
            }
        }
    }

    /// Distance from `x` to the boundary when `x` is inside (0 outside).
    pub fn depth(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ObstacleKind::Ball { center, radius } => (radius - norm(&sub(x, center))).max(0.0),
            ObstacleKind::Polytope { halfspaces } => {
                halfspaces.iter().map(|h| h.offset - dot(&h.normal, x)).fold(f64::INFINITY, f64::min).max(0.0)
            }
        }
    }

    /// Whether the closed body contains `x`.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.kind {
            ObstacleKind::Ball { center, radius } => norm(&sub(x, center)) <= *radius,
            ObstacleKind::Polytope { halfspaces } => halfspaces.iter().all(|h| dot(&h.normal, x) <= h.offset),
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            ObstacleKind::Ball { center, radius } => {
                (center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
            }
            ObstacleKind::Polytope { .. } => {
                let d = self.dim();
                let lo = (0..d).map(|a| self.vertices.iter().map(|v| v[a]).fold(f64::INFINITY, f64::min)).collect();
                let hi = (0..d).map(|a| self.vertices.iter().map(|v| v[a]).fold(f64::NEG_INFINITY, f64::max)).collect();
                (lo, hi)
            }
        }
    }

    /// Parameter interval `[s₀, s₁]` where the line `x + s·d` lies in the body.
    pub fn line_interval(&self, x: &[f64], d: &[f64]) -> Option<(f64, f64)> {
        match &self.kind {
            ObstacleKind::Ball { center, radius } => {
                let a = dot(d, d);
                let q = sub(x, center);
                let b = dot(&q, d) / a;
                let c = (dot(&q, &q) - radius * radius) / a;
                let disc = b * b - c;
                if disc < 0.0 {
                    None
                } else {
                    let r = disc.sqrt();
                    Some((-b - r, -b + r))
                }
            }
            ObstacleKind::Polytope { halfspaces } => {
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for h in halfspaces {
                    let den = dot(&h.normal, d);
                    let num = h.offset - dot(&h.normal, x);
                    if den == 0.0 {
                        if num < 0.0 {
                            return None;
                        }
                    } else if den > 0.0 {
                        hi = hi.min(num / den);
                    } else {
                        lo = lo.max(num / den);
                    }
                }
                (lo <= hi).then_some((lo, hi))
            }
        }
    }

    /// Signed clearance of the hyperplane `{y : ν·(y − x) = 0}`: positive when the
    /// body lies strictly on one side (the value is the gap), negative otherwise
    /// (minus the smaller penetration depth).
    pub fn plane_clearance(&self, x: &[f64], nu: &[f64]) -> f64 {
        let s = norm(nu);
        let (lo, hi) = match &self.kind {
            ObstacleKind::Ball { center, radius } => {
                let c = dot(&sub(center, x), nu) / s;
                (c - radius, c + radius)
            }
            ObstacleKind::Polytope { .. } => self.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let p = dot(&sub(v, x), nu) / s;
                (lo.min(p), hi.max(p))
            }),
        };
        if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            -hi
        } else {
            -(-lo).min(hi)
        }
    }

    /// Distance from the segment `[p, q]` to the body (0 when they meet).
    /// Exact for balls; for polytopes the largest gap to a single face
    /// half-space, which never exceeds the true distance.
    pub fn segment_distance(&self, p: &[f64], q: &[f64]) -> f64 {
        let d = sub(q, p);
        if let Some((s0, s1)) = self.line_interval(p, &d) {
            if s1 >= 0.0 && s0 <= 1.0 {
                return 0.0;
            }
        }
        match &self.kind {
            ObstacleKind::Ball { center, radius } => {
                let dd = dot(&d, &d);
                let s = if dd == 0.0 { 0.0 } else { (dot(&sub(center, p), &d) / dd).clamp(0.0, 1.0) };
                let y: Vec<f64> = p.iter().zip(&d).map(|(a, b)| a + s * b).collect();
                norm(&sub(&y, center)) - radius
            }
            ObstacleKind::Polytope { halfspaces } => {
                halfspaces
                    .iter()
                    .map(|h| (dot(&h.normal, p) - h.offset).min(dot(&h.normal, q) - h.offset))
                    .fold(0.0, f64::max)
            }
        }
    }
}

fn centroid(points: &[Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    (0..d).map(|a| points.iter().map(|p| p[a]).sum::<f64>() / points.len() as f64).collect()
}

/// A spatial box with obstacles inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub obstacles: Vec<Obstacle>,
}

impl Scene {
    /// Validates dimensions and that every obstacle sits strictly inside the box.
    pub fn new(box_lo: Vec<f64>, box_hi: Vec<f64>, obstacles: Vec<Obstacle>) -> Result<Self> {
        let scene = Self { box_lo, box_hi, obstacles };
        scene.validate()?;
        Ok(scene)
    }

    /// Re-runs the checks of [`Scene::new`] (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        let d = self.box_lo.len();
        if d == 0 || self.box_hi.len() != d || self.box_lo.iter().zip(&self.box_hi).any(|(a, b)| a >= b) {
            return Err(Error::Geometry("box corners must have equal length and lo < hi".into()));
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if o.dim() != d {
                return Err(Error::Geometry(format!("obstacle {k} has dimension {}, box has {d}", o.dim())));
            }
            let (lo, hi) = o.bounds();
            let margin = (0..d).map(|a| (lo[a] - self.box_lo[a]).min(self.box_hi[a] - hi[a])).fold(f64::INFINITY, f64::min);
            if margin <= 0.0 {
                return Err(Error::Geometry(format!("obstacle {k} touches or leaves the box (margin {margin:.3e})")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.box_lo.len()
    }

    /// Index of the first obstacle containing `x`.
    pub fn inside(&self, x: &[f64]) -> Option<usize> {
        self.obstacles.iter().position(|o| o.contains(x))
    }

    /// Index of the first obstacle met by the spatial segment `[p, q]`.
    pub fn segment_blocked(&self, p: &[f64], q: &[f64]) -> Option<usize> {
        let d = sub(q, p);
        self.obstacles.iter().position(|o| o.line_interval(p, &d).is_some_and(|(s0, s1)| s1 >= 0.0 && s0 <= 1.0))
    }
}

/// First obstacle met by a light ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    pub obstacle: usize,
    /// Ray parameter of the entry point.
    pub s: f64,
}

/// The obstacle a full light ray enters first (smallest entry parameter), if any.
///
/// Only the spatial line `x + sω` matters since obstacles are time-invariant.
/// Tangent rays count as hits.
pub fn ray_hits(ray: &LightRay, obstacles: &[Obstacle]) -> Option<RayHit> {
    let x = &ray.base[1..];
    obstacles
        .iter()
        .enumerate()
        .filter_map(|(k, o)| o.line_interval(x, &ray.omega).map(|(s0, _)| RayHit { obstacle: k, s: s0 }))
        .min_by(|a, b| a.s.total_cmp(&b.s))
}

/// A two-dimensional plane `point + a·u + b·v` in three-dimensional space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub point: Vec<f64>,
    pub span: [Vec<f64>; 2],
    pub normal: Vec<f64>,
    /// Smallest gap between the plane and any obstacle (infinite without obstacles).
    pub clearance: f64,
}

/// Outcome of [`g1_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum G1Outcome {
    Found(Plane),
    /// Every plane of the normal mesh meets an obstacle; the smallest penetration depth found.
    Blocked { min_penetration: f64 },
}

fn orthonormal_span(nu: &[f64]) -> [Vec<f64>; 2] {
    let pick = if nu[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let p = dot(&pick, nu);
    let mut u: Vec<f64> = pick.iter().zip(nu).map(|(a, b)| a - p * b).collect();
    let s = norm(&u);
    u.iter_mut().for_each(|x| *x /= s);
    let v = vec![nu[1] * u[2] - nu[2] * u[1], nu[2] * u[0] - nu[0] * u[2], nu[0] * u[1] - nu[1] * u[0]];
    [u, v]
}

/// Fibonacci mesh of `count` unit vectors on the upper half of the 2-sphere
/// (a plane normal and its negative describe the same plane).
fn normal_mesh(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            vec![r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Searches for a plane through `x` (in three dimensions) that misses every
/// obstacle. Candidate normals are the directions toward each obstacle center
/// followed by a 4000-point mesh of the sphere; the candidate with the largest
/// clearance is returned.
pub fn g1_check(x: &[f64], scene: &Scene) -> Result<G1Outcome> {
    if scene.dim() != 3 || x.len() != 3 {
        return Err(Error::Domain("the plane search is defined for n_space = 3".into()));
    }
    if let Some(k) = scene.inside(x) {
        return Err(Error::Domain(format!("point lies in obstacle {k}")));
    }
    let make = |nu: Vec<f64>, clearance: f64| Plane { point: x.to_vec(), span: orthonormal_span(&nu), normal: nu, clearance };
    if scene.obstacles.is_empty() {
        return Ok(G1Outcome::Found(make(vec![0.0, 0.0, 1.0], f64::INFINITY)));
    }
    let mut candidates: Vec<Vec<f64>> = scene
        .obstacles
        .iter()
        .map(|o| sub(&o.center(), x))
        .filter(|d| norm(d) > 0.0)
        .map(|d| {
            let s = norm(&d);
            d.into_iter().map(|c| c / s).collect()
        })
        .collect();
    candidates.extend(normal_mesh(4000));
    let clearance = |nu: &[f64]| scene.obstacles.iter().map(|o| o.plane_clearance(x, nu)).fold(f64::INFINITY, f64::min);
    let (best, value) = candidates
        .into_iter()
        .map(|nu| {
            let c = clearance(&nu);
            (nu, c)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty candidate list");
    if value > 0.0 {
        Ok(G1Outcome::Found(make(best, value)))
    } else {
        Ok(G1Outcome::Blocked { min_penetration: -value })
    }
}

/// Closed space-time polyline whose legs are light-ray segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightLoop {
    /// Vertices `(t, x)`; the last equals the first.
    pub vertices: Vec<Vec<f64>>,
    /// Obstacle the loop surrounds.
    pub obstacle: usize,
}

impl LightLoop {
    /// Number of legs.
    pub fn n_legs(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    /// Leg endpoints.
    pub fn legs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.vertices.windows(2).map(|w| (w[0].as_slice(), w[1].as_slice()))
    }

    /// Checks closure and that every leg has direction `(±1, ω)` with `|ω| = 1`.
    pub fn validate(&self) -> Result<()> {
        let (first, last) = match (self.vertices.first(), self.vertices.last()) {
            (Some(f), Some(l)) if self.vertices.len() >= 3 => (f, l),
            _ => return Err(Error::Geometry("a loop needs at least two legs".into())),
        };
        let gap = norm(&sub(first, last));
        if gap > 1e-12 {
            return Err(Error::Geometry(format!("loop is not closed (gap {gap:.3e})")));
        }
        for (k, (p, q)) in self.legs().enumerate() {
            let dt = (q[0] - p[0]).abs();
            let dx = norm(&sub(&q[1..], &p[1..]));
            if dt == 0.0 || (dt - dx).abs() > 1e-12 * dt.max(1.0) {
                return Err(Error::Geometry(format!("leg {k} is not a light-ray segment (|dt| = {dt}, |dx| = {dx})")));
            }
        }
        Ok(())
    }

    /// The same loop moved in time by `dt`.
    pub fn shifted_in_time(&self, dt: f64) -> Self {
        let vertices = self.vertices.iter().map(|v| {
            let mut w = v.clone();
            w[0] += dt;
            w
        });
        Self { vertices: vertices.collect(), obstacle: self.obstacle }
    }

    /// Splits every leg into `parts` equal light-ray segments.
    pub fn refined(&self, parts: usize) -> Self {
        let mut vertices = vec![self.vertices[0].clone()];
        for (p, q) in self.legs() {
            for i in 1..=parts {
                let s = i as f64 / parts as f64;
                vertices.push(p.iter().zip(q).map(|(a, b)| a + s * (b - a)).collect());
            }
        }
        *vertices.last_mut().unwrap() = self.vertices[0].clone();
        Self { vertices, obstacle: self.obstacle }
    }

    /// Spatial segments of the legs, checked against the scene.
    pub fn blocking(&self, scene: &Scene) -> Option<(usize, usize)> {
        self.legs().enumerate().find_map(|(k, (p, q))| scene.segment_blocked(&p[1..], &q[1..]).map(|o| (k, o)))
    }
}

/// Builds a light-ray loop around obstacle `index`.
///
/// The spatial projection is a square about the obstacle center whose sides
/// keep at least `clearance` from it; each side is walked as a rising then a
/// falling light segment, so the loop returns to its starting time `0`.
/// Rotations of the square, and for three dimensions the three coordinate
/// planes through the center, are tried until no leg meets any obstacle.
pub fn build_loop(index: usize, scene: &Scene, clearance: f64) -> Result<LightLoop> {
    let target = scene
        .obstacles
        .get(index)
        .ok_or_else(|| Error::Geometry(format!("no obstacle with index {index}")))?;
    if !(clearance > 0.0) {
        return Err(Error::Geometry(format!("clearance {clearance} must be positive (zero clearance is tangency)")));
    }
    let n = scene.dim();
    if !(2..=3).contains(&n) {
        return Err(Error::Domain("loops are built for n_space ∈ {2, 3}".into()));
    }
    let c = target.center();
    let half = target.circumradius() + clearance;
    let planes: Vec<(usize, usize)> = if n == 2 { vec![(0, 1)] } else { vec![(0, 1), (0, 2), (1, 2)] };
    let mut diagnostics = Vec::new();
    for &(a, b) in &planes {
        for q in 0..8 {
            let rot = q as f64 * PI / 16.0;
            let corner = |k: usize| -> Vec<f64> {
                let ang = rot + PI / 4.0 + k as f64 * PI / 2.0;
                let r = half * 2f64.sqrt();
                let mut x = c.clone();
                x[a] += r * ang.cos();
                x[b] += r * ang.sin();
                x
            };
            let mut vertices = Vec::with_capacity(9);
            let mut t = 0.0;
            for k in 0..4 {
                let p = corner(k);
                let r = corner(k + 1);
                let mid: Vec<f64> = p.iter().zip(&r).map(|(x, y)| 0.5 * (x + y)).collect();
                vertices.push([vec![t], p.clone()].concat());
                t += half;
                vertices.push([vec![t], mid].concat());
                t -= half;
            }
            vertices.push(vertices[0].clone());
            let lp = LightLoop { vertices, obstacle: index };
            let inside_box = lp.vertices.iter().all(|v| v[1..].iter().enumerate().all(|(d, x)| *x > scene.box_lo[d] && *x < scene.box_hi[d]));
            let too_close = lp.legs().any(|(p, q)| target.segment_distance(&p[1..], &q[1..]) < clearance * (1.0 - 1e-9));
            match lp.blocking(scene) {
                None if inside_box && !too_close => {
                    lp.validate()?;
                    return Ok(lp);
                }
                Some((leg, o)) => diagnostics.push(format!("plane ({a},{b}) rotation {q}: leg {leg} meets obstacle {o}")),
                None if !inside_box => diagnostics.push(format!("plane ({a},{b}) rotation {q}: loop leaves the box")),
                None => diagnostics.push(format!("plane ({a},{b}) rotation {q}: clearance not met")),
            }
        }
    }
    Err(Error::Geometry(format!("no loop around obstacle {index} with clearance {clearance}: {}", diagnostics.join("; "))))
}

/// Five-point Gauss-Legendre nodes and weights on `[0, 1]`.
const GL5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332_0, 0.118_463_442_528_094_5),
];

/// `∫ Σ_μ f_μ dx̄_μ` along the segment `[p, q]` with `pieces` sub-intervals.
fn segment_integral(p: &[f64], q: &[f64], pieces: usize, f: &mut impl FnMut(&[f64]) -> Vec<f64>) -> f64 {
    let d = sub(q, p);
    let mut total = 0.0;
    let mut y = vec![0.0; p.len()];
    for i in 0..pieces {
        for &(s, w) in &GL5 {
            let u = (i as f64 + s) / pieces as f64;
            y.iter_mut().zip(p.iter().zip(&d)).for_each(|(o, (a, b))| *o = a + u * b);
            total += w * dot(&f(&y), &d) / pieces as f64;
        }
    }
    total
}

/// `∮ Σ_μ A_μ dx̄_μ` along the loop (cubic interpolation, sub-intervals no
/// longer than the smallest grid spacing).
pub fn loop_integral(a: &VectorPotential, lp: &LightLoop) -> Result<f64> {
    lp.validate()?;
    let lat = a.grid().lattice();
    if lp.vertices.iter().any(|v| v.len() != lat.dim()) {
        return Err(Error::ShapeMismatch("loop and field dimensions differ".into()));
    }
    if let Some(v) = lp.vertices.iter().find(|v| !lat.contains(v)) {
        return Err(Error::Domain(format!("loop vertex {v:?} lies outside the sampled window")));
    }
    let samplers: Vec<Sampler> = a.components().iter().map(|c| Sampler::new(lat, c, Interp::Cubic)).collect();
    let h = lat.min_spacing();
    let mut f = |y: &[f64]| samplers.iter().map(|s| s.eval(y)).collect::<Vec<f64>>();
    Ok(lp
        .legs()
        .map(|(p, q)| {
            let pieces = (norm(&sub(q, p)) / h).ceil().max(1.0) as usize;
            segment_integral(p, q, pieces, &mut f)
        })
        .sum())
}

/// Result of [`winding_detect`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingReport {
    pub integral: f64,
    /// `round(integral / 2π)`; absent when the field is not flat near the loop.
    pub m: Option<i64>,
    /// `|integral − 2πm|`.
    pub residual: f64,
    /// Largest finite-difference curl on grid nodes near the loop.
    pub max_curl: f64,
    /// Flatness threshold that was applied.
    pub tol_flat: f64,
}

/// Default relative flatness tolerance for [`winding_detect`].
pub const TOL_FLAT_REL: f64 = 5e-2;

/// Largest curl component `|∂_μA_ν − ∂_νA_μ|` and largest first derivative
/// `|∂_μA_ν|` over grid nodes within two spacings of the loop.
pub fn curl_near_loop(a: &VectorPotential, lp: &LightLoop) -> (f64, f64) {
    let grid = a.grid();
    let lat = grid.lattice();
    let d = lat.dim();
    let strides = lat.strides();
    let reach = 2.0 * lat.min_spacing();
    let legs: Vec<(&[f64], &[f64])> = lp.legs().collect();
    let near = |x: &[f64]| {
        legs.iter().any(|(p, q)| {
            let dd = sub(q, p);
            let s = (dot(&sub(x, p), &dd) / dot(&dd, &dd)).clamp(0.0, 1.0);
            let y: Vec<f64> = p.iter().zip(&dd).map(|(a, b)| a + s * b).collect();
            norm(&sub(x, &y)) <= reach
        })
    };
    let comps = a.components();
    let mut idx = vec![0; d];
    let mut x = vec![0.0; d];
    let (mut curl, mut grad) = (0.0f64, 0.0f64);
    for f in 0..lat.len() {
        lat.unflat(f, &mut idx);
        if idx.iter().zip(&lat.shape).any(|(&i, &n)| i == 0 || i + 1 == n) {
            continue;
        }
        lat.point(f, &mut x);
        if !near(&x) {
            continue;
        }
        let der = |c: usize, ax: usize| (comps[c][f + strides[ax]] - comps[c][f - strides[ax]]) / (2.0 * lat.spacing[ax]);
        for mu in 0..d {
            for nu in 0..d {
                grad = grad.max(der(nu, mu).abs());
                if mu < nu {
                    curl = curl.max((der(nu, mu) - der(mu, nu)).abs());
                }
            }
        }
    }
    (curl, grad)
}

/// Loop integral plus the integer winding `m` with `∮ = 2πm`.
///
/// The field must be flat near the loop: the largest finite-difference curl
/// may not exceed `tol_flat_rel` times the largest first derivative there.
/// A violation returns [`Error::NotFlat`].
pub fn winding_detect(a: &VectorPotential, lp: &LightLoop, tol_flat_rel: f64) -> Result<WindingReport> {
    let integral = loop_integral(a, lp)?;
    let (max_curl, max_grad) = curl_near_loop(a, lp);
    let tol_flat = tol_flat_rel * max_grad;
    if max_curl > tol_flat {
        return Err(Error::NotFlat { max_curl, tol: tol_flat });
    }
    let m = (integral / (2.0 * PI)).round();
    Ok(WindingReport { integral, m: Some(m as i64), residual: (integral - 2.0 * PI * m).abs(), max_curl, tol_flat })
}

/// Loop integral that never refuses: the winding is reported only when flat.
pub fn winding_report(a: &VectorPotential, lp: &LightLoop, tol_flat_rel: f64) -> Result<WindingReport> {
    match winding_detect(a, lp, tol_flat_rel) {
        Err(Error::NotFlat { max_curl, tol }) => {
            let integral = loop_integral(a, lp)?;
            let m = (integral / (2.0 * PI)).round();
            Ok(WindingReport { integral, m: None, residual: (integral - 2.0 * PI * m).abs(), max_curl, tol_flat: tol })
        }
        other => other,
    }
}

/// Angle-field potential `Σ_j m_j ∇Θ_j` and the factor `C₀ = exp(−i ∫ 𝒜)`.
#[derive(Debug, Clone)]
pub struct ThetaGauge {
    /// Sampled potential (zero inside obstacles and in time).
    pub a: VectorPotential,
    /// `C₀` on the grid (zero on masked nodes).
    pub c0: ComplexField,
    /// Nodes inside an obstacle.
    pub mask: Vec<bool>,
    /// `max |ln|C₀||` over unmasked nodes.
    pub modulus_defect: f64,
    /// `max_j |e^{−2πi m_j} − 1|`.
    pub loop_consistency: f64,
    /// Angle centers, winding numbers and mollifier radii.
    pub centers: Vec<Vec<f64>>,
    pub m: Vec<f64>,
    pub cores: Vec<(f64, f64)>,
    base: Vec<f64>,
}

impl ThetaGauge {
    /// Closed-form potential at a spatial point (only the spatial components).
    pub fn field_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for ((c, &m), &core) in self.centers.iter().zip(&self.m).zip(&self.cores) {
            let (ax, ay) = winding_field(c, m, core, x);
            out[0] += ax;
            out[1] += ay;
        }
        out
    }

    /// `−∫ 𝒜·dx` along a spatial polyline starting at the base point.
    /// Segments entering an obstacle are refused.
    pub fn phase_along(&self, scene: &Scene, path: &[Vec<f64>]) -> Result<f64> {
        let start = path.first().ok_or_else(|| Error::Geometry("empty path".into()))?;
        if norm(&sub(start, &self.base)) > 1e-12 {
            return Err(Error::Geometry("paths must start at the base point".into()));
        }
        let mut total = 0.0;
        let mut f = |y: &[f64]| self.field_at(y);
        for w in path.windows(2) {
            if let Some(o) = scene.segment_blocked(&w[0], &w[1]) {
                return Err(Error::Geometry(format!("path segment {:?} → {:?} passes through obstacle {o}", w[0], w[1])));
            }
            let pieces = (norm(&sub(&w[1], &w[0])) / 0.01).ceil().max(1.0) as usize;
            total -= segment_integral(&w[0], &w[1], pieces, &mut f);
        }
        Ok(total)
    }

    /// The base point of the path integrals.
    pub fn base(&self) -> &[f64] {
        &self.base
    }
}

/// Builds `Σ_j m_j ∇Θ_j`, with `Θ_j` the angle about `points[j]` in the
/// `(x₁, x₂)` plane, and `C₀` by path integration from the lower box corner.
///
/// Each angle field is mollified inside a disc about `points[j]` whose radius
/// is a fraction of the depth of `points[j]` in obstacle `j`. `C₀` is
/// propagated along grid edges that avoid all obstacles, each edge integrated
/// in closed form by Gauss-Legendre quadrature.
pub fn theta_gauge(scene: &Scene, grid: &SpaceTimeGrid, points: &[Vec<f64>], m: &[f64]) -> Result<ThetaGauge> {
    let n = scene.dim();
    if !(2..=3).contains(&n) || grid.n_space() != n {
        return Err(Error::Domain("angle fields need n_space ∈ {2, 3} matching the grid".into()));
    }
    if points.len() != scene.obstacles.len() || m.len() != points.len() {
        return Err(Error::ShapeMismatch("one point and one winding number per obstacle are required".into()));
    }
    let mut cores = Vec::new();
    for (j, (p, o)) in points.iter().zip(&scene.obstacles).enumerate() {
        let depth = o.depth(p);
        if depth <= 0.0 || o.contains(p) && depth == 0.0 {
            return Err(Error::Geometry(format!("point {j} is not strictly inside obstacle {j}")));
        }
        let r = if n == 2 { depth } else { depth.min(o.circumradius()) };
        cores.push((0.3 * r, 0.6 * r));
    }
    let spatial = grid.spatial();
    let base = spatial.origin.clone();
    if scene.inside(&base).is_some() {
        return Err(Error::Geometry("the base point lies in an obstacle".into()));
    }
    let mut gauge = ThetaGauge {
        a: VectorPotential::zeros(grid),
        c0: ComplexField::new(grid.clone(), vec![Complex64::new(0.0, 0.0); grid.len()])?,
        mask: vec![false; grid.len()],
        modulus_defect: 0.0,
        loop_consistency: m.iter().map(|mj| (Complex64::from_polar(1.0, -2.0 * PI * mj) - 1.0).norm()).fold(0.0, f64::max),
        centers: points.to_vec(),
        m: m.to_vec(),
        cores,
        base,
    };

    let ms = spatial.len();
    let mut x = vec![0.0; n];
    let mut field_sp = vec![vec![0.0; ms]; n];
    let mut mask_sp = vec![false; ms];
    for s in 0..ms {
        spatial.point(s, &mut x);
        if scene.inside(&x).is_some() {
            mask_sp[s] = true;
            continue;
        }
        let v = gauge.field_at(&x);
        for a in 0..n {
            field_sp[a][s] = v[a];
        }
    }

    // Breadth-first propagation of the phase over unmasked spatial nodes.
    let strides = spatial.strides();
    let mut phase = vec![f64::NAN; ms];
    let mut queue = VecDeque::new();
    phase[0] = 0.0;
    queue.push_back(0usize);
    let mut idx = vec![0; n];
    let mut y = vec![0.0; n];
    while let Some(s) = queue.pop_front() {
        spatial.unflat(s, &mut idx);
        spatial.point(s, &mut x);
        for a in 0..n {
            for up in [true, false] {
                if (up && idx[a] + 1 == spatial.shape[a]) || (!up && idx[a] == 0) {
                    continue;
                }
                let t = if up { s + strides[a] } else { s - strides[a] };
                if !phase[t].is_nan() || mask_sp[t] {
                    continue;
                }
                spatial.point(t, &mut y);
                if scene.segment_blocked(&x, &y).is_some() {
                    continue;
                }
                let mut f = |p: &[f64]| gauge.field_at(p);
                phase[t] = phase[s] - segment_integral(&x, &y, 4, &mut f);
                queue.push_back(t);
            }
        }
    }
    if let Some(s) = (0..ms).find(|&s| !mask_sp[s] && phase[s].is_nan()) {
        spatial.point(s, &mut x);
        return Err(Error::Geometry(format!("node {x:?} cannot be reached from the base point without crossing an obstacle")));
    }

    let mut comps = vec![vec![0.0; grid.len()]; n + 1];
    let mut c0 = vec![Complex64::new(0.0, 0.0); grid.len()];
    for it in 0..grid.nt() {
        for s in 0..ms {
            let f = it * ms + s;
            gauge.mask[f] = mask_sp[s];
            if mask_sp[s] {
                continue;
            }
            for a in 0..n {
                comps[a + 1][f] = field_sp[a][s];
            }
            c0[f] = Complex64::from_polar(1.0, phase[s]);
        }
    }
    gauge.modulus_defect = c0.iter().zip(&gauge.mask).filter(|(_, &mk)| !mk).map(|(z, _)| z.norm().ln().abs()).fold(0.0, f64::max);
    gauge.a = VectorPotential::new(grid.clone(), comps, f64::INFINITY)?;
    gauge.c0 = ComplexField::new(grid.clone(), c0)?;
    Ok(gauge)
}

/// Principal value of `x` modulo `2π` in `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}
