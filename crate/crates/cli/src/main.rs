use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use raykit_core::catalog::AnalyticPotentialSpec;
use raykit_core::experiment::{run_experiment, ExperimentConfig, GridSpec};
use raykit_core::field::{PotentialPair, ScalarField, VectorPotential};
use raykit_core::gauge::{reconstruct_phi, GaugeOptions};
use raykit_core::obstacles::{build_loop, g1_check, winding_report, Scene, TOL_FLAT_REL};
use raykit_core::ray::{ray_field, ray_field_scalar, ray_transform_with, LightRay, RayOptions};
use raykit_core::sim::{dtn_extract, dtn_gap_proxy, go_build, go_residual, run_forward, ChiProfile, Probe, ProbeFamily, SimConfig};
use raykit_core::slice::slice_identity;
use raykit_core::spectral::dft_real;
use raykit_core::stability::{stability_bound, StabilityInputs};
use raykit_core::stpf::{load_stpf, save_stpf, StpfData};
use raykit_core::tomography::{reconstruct_divfree, reconstruct_scalar, TomographyOptions};

#[derive(Parser)]
#[command(name = "raykit", version, about = "Light-ray transforms, DtN simulation and reconstruction for magnetic wave equations")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized probes (overrides the experiment file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplier applied to tolerances.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the forward problem with Dirichlet data from a probe.
    Sim {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the Neumann trace as JSON.
        #[arg(long)]
        dtn: Option<PathBuf>,
    },
    /// Geometric-optics residual of the leading-order ansatz.
    Go {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        omega: Vec<f64>,
        #[arg(long)]
        k: f64,
    },
    /// DtN gap proxy between two vector potentials (scalar potentials default to zero).
    Gap {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        va: Option<PathBuf>,
        #[arg(long)]
        vb: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        cfl: f64,
    },
    /// Light-ray transform along one ray.
    Transform {
        #[arg(long)]
        field: PathBuf,
        /// Base point `t,x1,..`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        base: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        omega: Vec<f64>,
    },
    /// Ray transforms over the spatial lattice at t = 0.
    Rayfield {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        omega: Vec<f64>,
        /// Treat the field as a scalar potential.
        #[arg(long)]
        scalar: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare ray data with the space-time spectrum on its slice.
    Slice {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        omega: Vec<f64>,
    },
    /// Space-time spectrum of one component.
    Spectrum {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value_t = 0)]
        component: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover φ from a pure-gauge potential.
    GaugeReconstruct {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        probes: usize,
    },
    /// Reconstruct a divergence-free potential spectrum or a scalar potential from ray data.
    Reconstruct {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        scalar: bool,
        #[arg(long, default_value_t = 81)]
        n_angles: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Logarithmic stability bound for a DtN gap.
    Stability {
        #[arg(long)]
        gap: f64,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        c_omega: f64,
    },
    /// Obstacle checks: plane search through a point, or a light-ray loop.
    Obstacles {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        check_g1: Option<Vec<f64>>,
        /// Build a loop around this obstacle.
        #[arg(long)]
        r#loop: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        clearance: f64,
    },
    /// Loop integral and winding number around an obstacle.
    Winding {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        obstacle: usize,
        #[arg(long, default_value_t = 0.1)]
        clearance: f64,
        /// Start time of the loop.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t0: f64,
    },
    /// Run the pipelines of an experiment file; exit code 1 when a criterion fails.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Potentials given either as files or as a catalog entry on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
enum PairSource {
    Catalog { spec: AnalyticPotentialSpec, grid: GridSpec },
    Files { a: PathBuf, v: Option<PathBuf> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimFile {
    potentials: PairSource,
    boundary: Probe,
    #[serde(default = "half")]
    cfl: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GoFile {
    potentials: PairSource,
    grid: GridSpec,
    chi: ChiProfile,
}

fn half() -> f64 {
    0.5
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Samples a catalog entry, reusing a cached copy under `RAYKIT_DATA_DIR` when available.
fn sample_catalog(spec: &AnalyticPotentialSpec, grid: &GridSpec) -> Result<PotentialPair> {
    let key = serde_json::to_string(&(spec, grid))?;
    let mut h = DefaultHasher::new();
    key.hash(&mut h);
    let cache = std::env::var_os("RAYKIT_DATA_DIR").map(PathBuf::from);
    let paths = cache.as_ref().map(|d| {
        let stem = format!("catalog-{:016x}", h.finish());
        (d.join(format!("{stem}-a.stpf")), d.join(format!("{stem}-v.stpf")))
    });
    if let Some((pa, pv)) = &paths {
        if pa.exists() && pv.exists() {
            let a = load_stpf(pa)?.into_vector()?;
            let v = load_stpf(pv)?.into_scalar()?;
            return Ok(PotentialPair::new(a, v)?);
        }
    }
    let (a, v) = spec.sample(&grid.build()?)?;
    if let (Some(dir), Some((pa, pv))) = (&cache, &paths) {
        std::fs::create_dir_all(dir)?;
        save_stpf(&StpfData::Vector(a.clone()), pa)?;
        save_stpf(&StpfData::Scalar(v.clone()), pv)?;
    }
    Ok(PotentialPair::new(a, v)?)
}

fn load_vector(path: &Path) -> Result<VectorPotential> {
    Ok(load_stpf(path).with_context(|| format!("loading {}", path.display()))?.into_vector()?)
}

fn load_scalar(path: &Path) -> Result<ScalarField> {
    Ok(load_stpf(path).with_context(|| format!("loading {}", path.display()))?.into_scalar()?)
}

fn load_pair(a: &Path, v: Option<&Path>) -> Result<PotentialPair> {
    let a = load_vector(a)?;
    let v = match v {
        Some(p) => load_scalar(p)?,
        None => ScalarField::zeros(a.grid()),
    };
    Ok(PotentialPair::new(a, v)?)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn pair_from(src: &PairSource, base: &Path) -> Result<PotentialPair> {
    match src {
        PairSource::Catalog { spec, grid } => sample_catalog(spec, grid),
        PairSource::Files { a, v } => load_pair(&resolve(base, a), v.as_ref().map(|p| resolve(base, p)).as_deref()),
    }
}

fn load_scene(path: &Path) -> Result<Scene> {
    let scene: Scene = read_json(path)?;
    scene.validate()?;
    Ok(scene)
}

fn parent(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    if !(cli.tol_scale > 0.0) {
        bail!("--tol-scale must be positive");
    }
    match cli.cmd {
        Cmd::Sim { config, out, dtn } => {
            let file: SimFile = read_json(&config)?;
            let pair = pair_from(&file.potentials, &parent(&config))?;
            let boundary = file.boundary.sample(pair.grid());
            let mut cfg = SimConfig::new(pair.clone(), boundary);
            cfg.cfl = file.cfl;
            let u = run_forward(&cfg)?;
            if let Some(path) = out {
                let field = raykit_core::field::ComplexField::new(u.grid.clone(), u.values.clone())?;
                save_stpf(&StpfData::Complex(field), &path)?;
            }
            let trace = dtn_extract(&u, &pair.a)?;
            if let Some(path) = dtn {
                write_json(&path, &json!({ "nodes": trace.nodes, "nt": trace.grid.nt(), "values": trace.values }))?;
            }
            print_json(&json!({ "trace_l2": trace.l2_norm(), "max_abs": u.values.iter().map(|z| z.norm()).fold(0.0, f64::max) }))?;
        }
        Cmd::Go { config, omega, k } => {
            let file: GoFile = read_json(&config)?;
            let pair = pair_from(&file.potentials, &parent(&config))?;
            let ansatz = go_build(&file.grid.build()?, &pair, &omega, k, &file.chi, &RayOptions::default())?;
            print_json(&go_residual(&ansatz, &pair)?)?;
        }
        Cmd::Gap { a, b, va, vb, cfl } => {
            let p1 = load_pair(&a, va.as_deref())?;
            let p2 = load_pair(&b, vb.as_deref())?;
            print_json(&dtn_gap_proxy(&p1, &p2, &ProbeFamily::standard(p1.grid()), cfl)?)?;
        }
        Cmd::Transform { field, base, omega } => {
            let a = load_vector(&field)?;
            let ray = LightRay::new(base, omega)?;
            print_json(&ray_transform_with(&a, &ray, &RayOptions::default())?)?;
        }
        Cmd::Rayfield { field, omega, scalar, out } => {
            let data = load_stpf(&field)?;
            let opts = RayOptions::default();
            let rf = if scalar {
                let v = data.into_scalar()?;
                ray_field_scalar(&v, &omega, &v.grid().spatial(), &opts)?
            } else {
                let a = data.into_vector()?;
                ray_field(&a, &omega, &a.grid().spatial(), &opts)?
            };
            write_json(
                &out,
                &json!({
                    "shape": rf.base.shape, "origin": rf.base.origin, "spacing": rf.base.spacing,
                    "omega": rf.omega, "values": rf.values, "max_error_estimate": rf.max_error_estimate
                }),
            )?;
        }
        Cmd::Slice { field, omega } => {
            let a = load_vector(&field)?;
            let rf = ray_field(&a, &omega, &a.grid().spatial(), &RayOptions::default())?;
            print_json(&slice_identity(&rf, &a)?)?;
        }
        Cmd::Spectrum { field, component, out } => {
            let data = load_stpf(&field)?;
            let (lat, values) = match &data {
                StpfData::Scalar(v) => (v.grid().lattice().clone(), v.values().to_vec()),
                StpfData::Vector(a) => {
                    let c = a.components().get(component).with_context(|| format!("component {component} does not exist"))?;
                    (a.grid().lattice().clone(), c.clone())
                }
                other => bail!("cannot transform a {} field", other.kind_name()),
            };
            let spec = dft_real(&lat, &values);
            print_json(&json!({ "max_abs": spec.max_abs(), "edge_leakage": spec.edge_leakage, "hermitian_defect": spec.hermitian_defect() }))?;
            save_stpf(&StpfData::Spectrum(spec), &out)?;
        }
        Cmd::GaugeReconstruct { field, out, probes } => {
            let a = load_vector(&field)?;
            let opts = GaugeOptions { n_probes: probes, seed: cli.seed.unwrap_or(0), tol_ray_rel: 1e-6 * cli.tol_scale, ..GaugeOptions::default() };
            let cand = reconstruct_phi(&a, &opts)?;
            if let Some(path) = out {
                save_stpf(&StpfData::Scalar(cand.phi.clone()), &path)?;
            }
            print_json(&json!({ "residual": cand.residual, "max_probe_ray": cand.max_probe_ray }))?;
        }
        Cmd::Reconstruct { field, scalar, n_angles, out } => {
            let opts = TomographyOptions { n_angles, periods: if scalar { 1 } else { 0 }, ..TomographyOptions::default() };
            if scalar {
                let v = load_scalar(&field)?;
                let rec = reconstruct_scalar(&v, &opts)?;
                let num: f64 = rec.values.iter().zip(v.values()).map(|(a, b)| (a - b).powi(2)).sum();
                let den: f64 = v.values().iter().map(|b| b * b).sum();
                if let Some(path) = out {
                    save_stpf(&StpfData::Scalar(ScalarField::new(v.grid().clone(), rec.values.clone(), v.support_radius())?), &path)?;
                }
                print_json(&json!({ "n_data_nodes": rec.n_data_nodes, "relative_l2_error": (num / den.max(f64::MIN_POSITIVE)).sqrt() }))?;
            } else {
                let a = load_vector(&field)?;
                let rec = reconstruct_divfree(&a, &opts)?;
                if let Some(path) = out {
                    write_json(&path, &json!({ "nodes": rec.nodes, "values": rec.values }))?;
                }
                print_json(&json!({ "n_nodes": rec.nodes.len() }))?;
            }
        }
        Cmd::Stability { gap, n, alpha, c, c_omega } => {
            let inputs = StabilityInputs { alpha, c, c_omega, ..StabilityInputs::new(gap, n) };
            print_json(&stability_bound(&inputs)?)?;
        }
        Cmd::Obstacles { scene, check_g1, r#loop, clearance } => {
            let scene = load_scene(&scene)?;
            if let Some(x) = check_g1 {
                print_json(&g1_check(&x, &scene)?)?;
            }
            if let Some(k) = r#loop {
                print_json(&build_loop(k, &scene, clearance)?)?;
            }
        }
        Cmd::Winding { field, scene, obstacle, clearance, t0 } => {
            let a = load_vector(&field)?;
            let scene = load_scene(&scene)?;
            let lp = build_loop(obstacle, &scene, clearance)?.shifted_in_time(t0);
            let r = winding_report(&a, &lp, TOL_FLAT_REL * cli.tol_scale)?;
            print_json(&r)?;
        }
        Cmd::Experiment { config, out_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            cfg.tol_scale *= cli.tol_scale;
            if let Some(dir) = out_dir {
                cfg.out_dir = Some(std::env::current_dir()?.join(dir));
            }
            let outcome = run_experiment(&cfg, &parent(&config))?;
            for r in &outcome.reports {
                println!("{} {}", r.pipeline, if r.pass { "pass" } else { "FAIL" });
            }
            return Ok(if outcome.pass { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
