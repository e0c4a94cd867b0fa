//! End-to-end pipelines driven by a configuration file, each producing a
//! structured report with measured values, tolerances and pass/fail flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::{AnalyticPotentialSpec, Bump, CurlPlane, PotentialKind, Profile};
use crate::error::{Error, Result};
use crate::field::{gauge_transform, gradient, PotentialPair, VectorPotential};
use crate::gauge::{reconstruct_phi, GaugeOptions};
use crate::grid::SpaceTimeGrid;
use crate::obstacles::{build_loop, winding_detect, Obstacle, Scene, TOL_FLAT_REL};
use crate::ray::{ray_field, RayOptions};
use crate::sim::{dtn_gap_proxy, go_build, go_residual, ChiProfile, ProbeFamily};
use crate::slice::slice_identity;
use crate::spectral::dft_real;
use crate::stability::{stability_bound, StabilityInputs};
use crate::stpf::{load_stpf, save_stpf, StpfData};
use crate::tomography::{reconstruct_divfree, TomographyOptions};

/// Uniform grid description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_space: usize,
    pub nt: usize,
    pub t: (f64, f64),
    pub nx: usize,
    pub x: (f64, f64),
}

impl GridSpec {
    pub fn build(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::uniform(self.n_space, self.nt, self.t, self.nx, self.x)
    }

    fn cube(n_space: usize, n: usize) -> Self {
        Self { n_space, nt: n, t: (-1.0, 1.0), nx: n, x: (-1.0, 1.0) }
    }
}

/// Where a vector potential comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PotentialInput {
    /// Closed-form catalog entry sampled on a grid.
    Catalog { spec: AnalyticPotentialSpec, grid: GridSpec },
    /// STPF vector potential file (relative paths resolve against the config directory).
    File { path: PathBuf },
}

impl PotentialInput {
    fn load(&self, base: &Path) -> Result<VectorPotential> {
        match self {
            PotentialInput::Catalog { spec, grid } => Ok(spec.sample(&grid.build()?)?.0),
            PotentialInput::File { path } => load_stpf(base.join(path))?.into_vector(),
        }
    }
}

fn default_gauge_bump() -> Bump {
    Bump { center: vec![0.0, 0.1, -0.05], widths: vec![0.2; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.7) }
}

fn default_gaussian_input() -> PotentialInput {
    let bump = Bump { center: vec![0.0, 0.05, -0.1], widths: vec![0.15; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.7) };
    PotentialInput::Catalog {
        spec: AnalyticPotentialSpec { n_space: 2, kind: PotentialKind::GaussianBump { bump, a: vec![1.0, 0.5, -0.7], v: 0.0 } },
        grid: GridSpec::cube(2, 64),
    }
}

/// Divergence-free curl entry used by the reconstruction pipeline.
pub fn divfree_entry() -> AnalyticPotentialSpec {
    let bump = Bump { center: vec![0.0, 0.05, -0.03], widths: vec![0.12; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.72) };
    let planes = vec![
        CurlPlane { mu: 0, nu: 1, weight: 1.0 },
        CurlPlane { mu: 1, nu: 2, weight: 0.7 },
        CurlPlane { mu: 0, nu: 2, weight: -0.4 },
    ];
    AnalyticPotentialSpec { n_space: 2, kind: PotentialKind::DivergenceFreeCurl { bump, planes } }
}

fn default_divfree_input() -> PotentialInput {
    PotentialInput::Catalog { spec: divfree_entry(), grid: GridSpec::cube(2, 64) }
}

fn d64() -> usize {
    64
}
fn d81() -> usize {
    81
}
fn tol_gauge() -> f64 {
    1e-3
}
fn tol_probe() -> f64 {
    1e-4
}
fn tol_slice() -> f64 {
    1e-3
}
fn tol_rec() -> f64 {
    1e-2
}
fn default_gaps() -> Vec<f64> {
    vec![1e-2, 1e-4, 1e-6]
}
fn two() -> usize {
    2
}
fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn default_omega() -> Vec<f64> {
    vec![0.4f64.cos(), 0.4f64.sin()]
}
fn default_ks() -> Vec<f64> {
    vec![20.0, 40.0, 80.0]
}
fn d256() -> usize {
    256
}
fn default_windings() -> Vec<i64> {
    vec![-2, -1, 0, 1, 2]
}

/// One pipeline and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "snake_case")]
pub enum Pipeline {
    /// `A = ∇φ` for a catalog bump; recover `φ` and compare.
    GaugeRoundtrip {
        #[serde(default = "default_gauge_bump")]
        bump: Bump,
        #[serde(default = "d64")]
        n: usize,
        #[serde(default = "tol_gauge")]
        tol: f64,
        /// Probe-ray tolerance relative to `‖A‖_∞ × ray length`.
        #[serde(default = "tol_probe")]
        tol_ray_rel: f64,
    },
    /// Ray data along one direction against the space-time spectrum on its slice.
    SliceVerify {
        #[serde(default = "default_gaussian_input")]
        input: PotentialInput,
        #[serde(default = "default_omega")]
        omega: Vec<f64>,
        #[serde(default = "tol_slice")]
        tol: f64,
    },
    /// Divergence-free reconstruction against the direct spectrum on the half cone.
    Reconstruct {
        #[serde(default = "default_divfree_input")]
        input: PotentialInput,
        #[serde(default = "d81")]
        n_angles: usize,
        #[serde(default = "tol_rec")]
        tol: f64,
    },
    /// Stability bound over a list of DtN gaps.
    StabilitySweep {
        #[serde(default = "default_gaps")]
        gaps: Vec<f64>,
        #[serde(default = "two")]
        n: usize,
        #[serde(default = "unit")]
        c: f64,
        #[serde(default = "unit")]
        c_omega: f64,
    },
    /// DtN gap proxies for a gauge pair and a non-gauge perturbation.
    DtnGauge {
        #[serde(default = "one")]
        n_space: usize,
    },
    /// Geometric-optics residual decay in `k`.
    GoDecay {
        #[serde(default = "default_ks")]
        ks: Vec<f64>,
        #[serde(default = "d256")]
        nx: usize,
    },
    /// Winding detection around an obstacle.
    ObstacleWinding {
        #[serde(default = "default_windings")]
        m: Vec<i64>,
    },
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::GaugeRoundtrip { .. } => "gauge_roundtrip",
            Pipeline::SliceVerify { .. } => "slice_verify",
            Pipeline::Reconstruct { .. } => "reconstruct",
            Pipeline::StabilitySweep { .. } => "stability_sweep",
            Pipeline::DtnGauge { .. } => "dtn_gauge",
            Pipeline::GoDecay { .. } => "go_decay",
            Pipeline::ObstacleWinding { .. } => "obstacle_winding",
        }
    }

    fn property(&self) -> &'static str {
        match self {
            Pipeline::GaugeRoundtrip { .. } => "a potential with vanishing light-ray transforms is the space-time gradient of a compactly supported function",
            Pipeline::SliceVerify { .. } => "the spatial transform of the ray data equals the space-time transform of A0 + w.A at (-w.xi, xi)",
            Pipeline::Reconstruct { .. } => "ray data plus the divergence constraint determine the spectrum of A inside |tau| <= |xi|/2",
            Pipeline::StabilitySweep { .. } => "the sup-norm bound behaves like 1/log(C/gap) and decreases with the gap",
            Pipeline::DtnGauge { .. } => "gauge-equivalent potentials with g = 1 on the boundary have equal DtN maps",
            Pipeline::GoDecay { .. } => "the geometric-optics residual decays like 1/k",
            Pipeline::ObstacleWinding { .. } => "loop integrals of flat potentials around an obstacle are 2 pi times an integer",
        }
    }
}

/// Top-level configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub pipelines: Vec<Pipeline>,
    #[serde(default)]
    pub seed: u64,
    /// Multiplier applied to every tolerance.
    #[serde(default = "unit")]
    pub tol_scale: f64,
    /// Directory receiving reports and output fields.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads a JSON configuration.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_scale > 0.0) {
            return Err(Error::Domain(format!("tol_scale {} must be positive", self.tol_scale)));
        }
        for p in &self.pipelines {
            let tols: Vec<f64> = match p {
                Pipeline::GaugeRoundtrip { tol, tol_ray_rel, .. } => vec![*tol, *tol_ray_rel],
                Pipeline::SliceVerify { tol, .. } | Pipeline::Reconstruct { tol, .. } => vec![*tol],
                _ => vec![],
            };
            if tols.iter().any(|t| !(*t > 0.0)) {
                return Err(Error::Domain(format!("pipeline {}: tolerances must be positive", p.name())));
            }
        }
        Ok(())
    }
}

/// One checked condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    /// Either `"<"` (value below bound), `">"` or `"="`.
    pub relation: String,
    pub bound: f64,
    pub pass: bool,
}

impl Criterion {
    fn below(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: "<".into(), bound, pass: value < bound }
    }

    fn equal(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: "=".into(), bound, pass: value == bound }
    }
}

/// Structured report of one pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub pipeline: String,
    pub property: String,
    pub inputs: Value,
    pub measured: BTreeMap<String, Value>,
    pub criteria: Vec<Criterion>,
    pub pass: bool,
}

/// All reports of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub reports: Vec<Report>,
    pub pass: bool,
}

/// Runs every pipeline; reports (and output fields) are written to `out_dir` when set.
///
/// `base` resolves relative file inputs and a relative `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let out_dir = cfg.out_dir.as_ref().map(|d| base.join(d));
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut reports = Vec::new();
    for (i, p) in cfg.pipelines.iter().enumerate() {
        let mut ctx = Context { seed: cfg.seed, scale: cfg.tol_scale, out: out_dir.clone(), base: base.to_path_buf(), measured: BTreeMap::new(), criteria: Vec::new() };
        let inputs = serde_json::to_value(p)?;
        run_pipeline(p, &mut ctx).map_err(|e| Error::Domain(format!("pipeline {} ({}): {e}", i, p.name())))?;
        let pass = ctx.criteria.iter().all(|c| c.pass);
        let report = Report { pipeline: p.name().into(), property: p.property().into(), inputs, measured: ctx.measured, criteria: ctx.criteria, pass };
        if let Some(dir) = &out_dir {
            std::fs::write(dir.join(format!("{:02}_{}.json", i, p.name())), serde_json::to_string_pretty(&report)?)?;
        }
        reports.push(report);
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(ExperimentOutcome { reports, pass })
}

struct Context {
    seed: u64,
    scale: f64,
    out: Option<PathBuf>,
    base: PathBuf,
    measured: BTreeMap<String, Value>,
    criteria: Vec<Criterion>,
}

impl Context {
    fn measure(&mut self, key: &str, v: impl Serialize) -> Result<()> {
        self.measured.insert(key.into(), serde_json::to_value(v)?);
        Ok(())
    }
}

fn run_pipeline(p: &Pipeline, ctx: &mut Context) -> Result<()> {
    match p {
        Pipeline::GaugeRoundtrip { bump, n, tol, tol_ray_rel } => {
            let grid = GridSpec::cube(bump.center.len() - 1, *n).build()?;
            let phi = bump.sample(&grid)?;
            let spec = AnalyticPotentialSpec::new(grid.n_space(), PotentialKind::GradientOfBump { bump: bump.clone() })?;
            let (a, _) = spec.sample(&grid)?;
            let opts = GaugeOptions { seed: ctx.seed, tol_ray_rel: *tol_ray_rel, ..GaugeOptions::default() };
            let cand = reconstruct_phi(&a, &opts)?;
            let err = cand.phi.values().iter().zip(phi.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / phi.max_abs();
            ctx.measure("phi_sup_error_rel", err)?;
            ctx.measure("gradient_residual_rel", cand.residual.max() / a.max_abs())?;
            ctx.measure("max_probe_ray", cand.max_probe_ray)?;
            ctx.criteria.push(Criterion::below("phi_sup_error_rel", err, tol * ctx.scale));
            if let Some(dir) = &ctx.out {
                save_stpf(&StpfData::Scalar(cand.phi.clone()), dir.join("gauge_roundtrip_phi.stpf"))?;
            }
        }
        Pipeline::SliceVerify { input, omega, tol } => {
            let a = input.load(&ctx.base)?;
            let base = a.grid().spatial();
            let rf = ray_field(&a, omega, &base, &RayOptions::default())?;
            let rep = slice_identity(&rf, &a)?;
            ctx.measure("slice", &rep)?;
            ctx.criteria.push(Criterion::below("max_rel_mismatch", rep.max_rel_mismatch, tol * ctx.scale));
        }
        Pipeline::Reconstruct { input, n_angles, tol } => {
            let a = input.load(&ctx.base)?;
            let opts = TomographyOptions { n_angles: *n_angles, ..TomographyOptions::default() };
            let rec = reconstruct_divfree(&a, &opts)?;
            let lat = a.grid().lattice();
            let (mut num, mut den) = (0.0, 0.0);
            for (j, comp) in a.components().iter().enumerate() {
                let s = dft_real(lat, comp);
                for (i, &f) in rec.nodes.iter().enumerate() {
                    num += (rec.values[i][j] - s.values[f]).norm_sqr();
                    den += s.values[f].norm_sqr();
                }
            }
            let rel = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
            ctx.measure("n_nodes", rec.nodes.len())?;
            ctx.measure("relative_l2_error", rel)?;
            ctx.criteria.push(Criterion::below("relative_l2_error", rel, tol * ctx.scale));
        }
        Pipeline::StabilitySweep { gaps, n, c, c_omega } => {
            let mut rows = Vec::new();
            let mut worst_residual = 0.0f64;
            let mut sorted: Vec<f64> = gaps.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let mut prev = f64::INFINITY;
            let mut monotone = true;
            for &gap in &sorted {
                let inputs = StabilityInputs { c: *c, c_omega: *c_omega, ..StabilityInputs::new(gap, *n) };
                let r = stability_bound(&inputs)?;
                worst_residual = worst_residual.max(r.balancing_residual);
                monotone &= r.bound < prev;
                prev = r.bound;
                rows.push(json!({ "gap": gap, "bound": r.bound, "rho": r.rho, "chain_value": r.chain_value }));
            }
            ctx.measure("rows", rows)?;
            ctx.criteria.push(Criterion::below("balancing_residual", worst_residual, 1e-12 * ctx.scale));
            ctx.criteria.push(Criterion::equal("bound_decreases_with_gap", if monotone { 1.0 } else { 0.0 }, 1.0));
        }
        Pipeline::DtnGauge { n_space } => {
            let r = dtn_gauge_case(*n_space)?;
            ctx.measure("noise_floor", r.floor)?;
            ctx.measure("gauge_proxy", r.gauge)?;
            ctx.measure("non_gauge_proxy", r.other)?;
            ctx.criteria.push(Criterion::below("gauge_over_floor", r.gauge / r.floor, 3.0 * ctx.scale));
            ctx.criteria.push(Criterion::below("gauge_over_non_gauge", r.gauge / r.other, 0.01 * ctx.scale));
        }
        Pipeline::GoDecay { ks, nx } => {
            let values = go_decay_case(ks, *nx)?;
            let slope = fit_slope(ks, &values);
            ctx.measure("normalized_residuals", &values)?;
            ctx.measure("slope", slope)?;
            ctx.criteria.push(Criterion::below("slope_deviation", (slope + 1.0).abs(), 0.2 * ctx.scale));
        }
        Pipeline::ObstacleWinding { m } => {
            let rows = winding_case(m)?;
            let mut worst = 0.0f64;
            let mut mismatches = 0.0;
            for r in &rows {
                worst = worst.max(r.residual).max(r.perturbed_residual);
                if r.detected != Some(r.m) || r.perturbed_detected != Some(r.m) {
                    mismatches += 1.0;
                }
            }
            ctx.measure("rows", &rows)?;
            ctx.criteria.push(Criterion::equal("winding_mismatches", mismatches, 0.0));
            ctx.criteria.push(Criterion::below("max_residual", worst, 1e-3 * ctx.scale));
        }
    }
    Ok(())
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Gap proxies of the DtN gauge-invariance experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtnGaugeResult {
    /// Identical potentials, coarse grid against its refinement.
    pub floor: f64,
    /// `(A, V)` against its gauge transform on one grid.
    pub gauge: f64,
    /// `(A, V)` against a non-gauge perturbation of size `‖∇φ‖_∞` on one grid.
    pub other: f64,
}

fn dtn_grid(n: usize, nx: usize, t_end: f64) -> Result<SpaceTimeGrid> {
    let h = 2.0 / (nx - 1) as f64;
    let dt = 0.5 * h;
    let nt = (t_end / dt).round() as usize + 1;
    SpaceTimeGrid::new(n, [vec![nt], vec![nx; n]].concat(), [vec![0.0], vec![-1.0; n]].concat(), [vec![dt], vec![h; n]].concat())
}

/// Builds `(A, V)`, its gauge transform and a non-gauge perturbation on `grid`.
/// Returns the three pairs and `‖∇φ‖_∞`.
pub fn dtn_gauge_pairs(grid: &SpaceTimeGrid) -> Result<(PotentialPair, PotentialPair, PotentialPair, f64)> {
    let n = grid.n_space();
    let tc = 0.5 * (grid.origin()[0] + grid.lattice().upper(0));
    let bump = Bump { center: [vec![tc], vec![0.0; n]].concat(), widths: vec![0.25; n + 1], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.7) };
    let amps = [0.8, 0.5, -0.6][..n + 1].to_vec();
    let (a, v) = AnalyticPotentialSpec::new(n, PotentialKind::GaussianBump { bump, a: amps, v: 0.7 })?.sample(grid)?;
    let gb = Bump { center: [vec![tc - 0.1], vec![0.1; n]].concat(), widths: vec![0.3; n + 1], amplitude: 0.5, profile: Profile::Gaussian, cutoff: Some(0.6) };
    let phi = gb.sample(grid)?;
    let grad_max = gradient(&phi).max_abs();
    let (ag, vg) = gauge_transform(&a, &v, &phi)?;
    let pb = Bump { center: [vec![tc], vec![0.1; n]].concat(), widths: vec![0.2; n + 1], amplitude: grad_max, profile: Profile::Gaussian, cutoff: Some(0.6) };
    let pert = pb.sample(grid)?;
    let mut comps = a.components().to_vec();
    comps[1].iter_mut().zip(pert.values()).for_each(|(x, y)| *x += y);
    let an = VectorPotential::new(grid.clone(), comps, a.support_radius().max(pert.support_radius()))?;
    Ok((PotentialPair::new(a, v.clone())?, PotentialPair::new(ag, vg)?, PotentialPair::new(an, v)?, grad_max))
}

/// Runs the DtN gauge experiment: `n = 1` on 201 nodes over `t ∈ [0, 4]`,
/// `n = 2` on 97² nodes over `t ∈ [0, 3]`; the noise floor uses the `2N − 1` refinement.
pub fn dtn_gauge_case(n: usize) -> Result<DtnGaugeResult> {
    let (nx, t_end) = match n {
        1 => (201, 4.0),
        2 => (97, 3.0),
        _ => return Err(Error::Domain("the DtN experiment supports n_space ∈ {1, 2}".into())),
    };
    let coarse = dtn_grid(n, nx, t_end)?;
    let fine = dtn_grid(n, 2 * nx - 1, t_end)?;
    let (p, pg, pn, _) = dtn_gauge_pairs(&coarse)?;
    let (pf, _, _, _) = dtn_gauge_pairs(&fine)?;
    let probes = ProbeFamily::standard(&coarse);
    let floor = dtn_gap_proxy(&p, &pf, &probes, 0.5)?.proxy;
    let gauge = dtn_gap_proxy(&p, &pg, &probes, 0.5)?.proxy;
    let other = dtn_gap_proxy(&p, &pn, &probes, 0.5)?.proxy;
    Ok(DtnGaugeResult { floor, gauge, other })
}

/// Potentials of the geometric-optics experiment on `[-1.5, 1.5] × [-1, 1]²`.
pub fn go_potentials() -> Result<PotentialPair> {
    let grid = SpaceTimeGrid::uniform(2, 97, (-1.5, 1.5), 97, (-1.0, 1.0))?;
    let bump = Bump { center: vec![0.0; 3], widths: vec![0.25; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.7) };
    let (a, v) = AnalyticPotentialSpec::new(2, PotentialKind::GaussianBump { bump, a: vec![0.8, 0.5, -0.6], v: 0.7 })?.sample(&grid)?;
    PotentialPair::new(a, v)
}

/// Normalized geometric-optics residuals for each `k` on an `nx²` grid over
/// `[-0.75, 0.75]²` with five time levels (`dt = dx`) around `t = 0`.
pub fn go_decay_case(ks: &[f64], nx: usize) -> Result<Vec<f64>> {
    let pair = go_potentials()?;
    let h = 1.5 / (nx - 1) as f64;
    let grid = SpaceTimeGrid::new(2, vec![5, nx, nx], vec![-2.0 * h, -0.75, -0.75], vec![h, h, h])?;
    let chi = ChiProfile { center: vec![0.0; 3], width: 0.3, amplitude: 1.0 };
    let omega = [0.6, 0.8];
    let kmax = ks.iter().cloned().fold(0.0, f64::max);
    let ansatz = go_build(&grid, &pair, &omega, kmax, &chi, &RayOptions::default())?;
    ks.iter()
        .map(|&k| {
            let mut a = ansatz.clone();
            a.k = k;
            Ok(go_residual(&a, &pair)?.normalized)
        })
        .collect()
}

/// One row of the winding experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingRow {
    pub m: i64,
    pub integral: f64,
    pub detected: Option<i64>,
    pub residual: f64,
    pub perturbed_detected: Option<i64>,
    pub perturbed_residual: f64,
}

/// Scene of the winding experiment: two balls in `[-1, 1]²`.
pub fn winding_scene() -> Result<Scene> {
    Scene::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![Obstacle::ball(vec![0.1, -0.05], 0.25)?, Obstacle::ball(vec![0.7, 0.6], 0.15)?])
}

/// Winding detection for `m ∇Θ` about the first obstacle, with and without a gauge perturbation.
pub fn winding_case(ms: &[i64]) -> Result<Vec<WindingRow>> {
    let grid = SpaceTimeGrid::new(2, vec![16, 65, 65], vec![-0.5, -1.0, -1.0], vec![0.1, 2.0 / 64.0, 2.0 / 64.0])?;
    let scene = winding_scene()?;
    let lp = build_loop(0, &scene, 0.15)?;
    let gb = Bump { center: vec![0.2, 0.3, 0.0], widths: vec![0.3; 3], amplitude: 0.8, profile: Profile::Gaussian, cutoff: Some(0.6) };
    let grad = gradient(&gb.sample(&grid)?);
    ms.iter()
        .map(|&m| {
            let spec = AnalyticPotentialSpec::new(2, PotentialKind::WindingTheta { center: vec![0.1, -0.05], m: m as f64, core_inner: 0.08, core_outer: 0.18 })?;
            let (a, _) = spec.sample(&grid)?;
            let r = winding_detect(&a, &lp, TOL_FLAT_REL)?;
            let rp = winding_detect(&a.axpby(1.0, &grad, 1.0)?, &lp, TOL_FLAT_REL)?;
            Ok(WindingRow { m, integral: r.integral, detected: r.m, residual: r.residual, perturbed_detected: rp.m, perturbed_residual: rp.residual })
        })
        .collect()
}
