use num_complex::Complex64;
use proptest::prelude::*;

use raykit_core::catalog::{AnalyticPotentialSpec, Bump, PotentialKind, Profile};
use raykit_core::field::{PotentialPair, ScalarField, VectorPotential};
use raykit_core::grid::SpaceTimeGrid;
use raykit_core::ray::RayOptions;
use raykit_core::sim::{
    boundary_h1_norm, dtn_extract, dtn_gap_proxy, go_build, go_residual, greens_residual, lateral_nodes, run_backward, run_forward,
    trace_nodes, BoundaryData, ChiProfile, Probe, ProbeFamily, SimConfig, TimeWindow,
};
use raykit_core::Error;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn grid_1d(nx: usize, t_end: f64) -> SpaceTimeGrid {
    let h = 2.0 / (nx - 1) as f64;
    let dt = 0.5 * h;
    let nt = (t_end / dt).round() as usize + 1;
    SpaceTimeGrid::new(1, vec![nt, nx], vec![0.0, -1.0], vec![dt, h]).unwrap()
}

fn grid_nd(n: usize, nx: usize, t_end: f64) -> SpaceTimeGrid {
    let h = 2.0 / (nx - 1) as f64;
    let dt = 0.5 * h;
    let nt = (t_end / dt).round() as usize + 1;
    SpaceTimeGrid::new(n, [vec![nt], vec![nx; n]].concat(), [vec![0.0], vec![-1.0; n]].concat(), [vec![dt], vec![h; n]].concat()).unwrap()
}

fn bump_pair(g: &SpaceTimeGrid, shift: f64, a: &[f64], v: f64) -> PotentialPair {
    let n = g.n_space();
    let bump = Bump {
        center: [vec![1.5], vec![shift; n]].concat(),
        widths: vec![0.25; n + 1],
        amplitude: 1.0,
        profile: Profile::Gaussian,
        cutoff: Some(0.7),
    };
    let spec = AnalyticPotentialSpec::new(n, PotentialKind::GaussianBump { bump, a: a[..n + 1].to_vec(), v }).unwrap();
    let (a, v) = spec.sample(g).unwrap();
    PotentialPair::new(a, v).unwrap()
}

// Closed-form potentials and solution for a manufactured problem in one space dimension.
fn a0(t: f64, x: f64) -> f64 {
    0.3 * (x + t).sin()
}
fn a1(t: f64, x: f64) -> f64 {
    0.2 * (x - t).cos()
}
fn pot(t: f64, x: f64) -> f64 {
    0.5 + 0.1 * x * t
}
fn exact(t: f64, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * t + x) * (1.0 + 0.3 * x * x)
}

/// `L u` written out: `−u_tt − 2iA₀u_t − i∂ₜA₀u + A₀²u + u_xx + 2iA₁u_x + i∂ₓA₁u − A₁²u + Vu`.
fn forcing(t: f64, x: f64) -> Complex64 {
    let e = Complex64::from_polar(1.0, 2.0 * t + x);
    let (w, dw, ddw) = (1.0 + 0.3 * x * x, 0.6 * x, 0.6);
    let u = e * w;
    let u_t = 2.0 * I * u;
    let u_tt = -4.0 * u;
    let u_x = e * (I * w + dw);
    let u_xx = e * (-w + 2.0 * I * dw + ddw);
    let (p, q) = (a0(t, x), a1(t, x));
    let dt_a0 = 0.3 * (x + t).cos();
    let dx_a1 = -0.2 * (x - t).sin();
    -u_tt - 2.0 * I * p * u_t - I * dt_a0 * u + p * p * u + u_xx + 2.0 * I * q * u_x + I * dx_a1 * u - q * q * u + pot(t, x) * u
}

fn manufactured_error(nx: usize) -> f64 {
    let g = grid_1d(nx, 1.0);
    let a = VectorPotential::new(
        g.clone(),
        vec![
            ScalarField::from_fn(&g, f64::INFINITY, |p| a0(p[0], p[1])).into_values(),
            ScalarField::from_fn(&g, f64::INFINITY, |p| a1(p[0], p[1])).into_values(),
        ],
        f64::INFINITY,
    )
    .unwrap();
    let v = ScalarField::from_fn(&g, f64::INFINITY, |p| pot(p[0], p[1]));
    let pair = PotentialPair::new(a, v).unwrap();
    let lat = g.lattice().clone();
    let mut p = vec![0.0; 2];
    let mut exact_all = Vec::with_capacity(lat.len());
    let mut source = Vec::with_capacity(lat.len());
    for f in 0..lat.len() {
        lat.point(f, &mut p);
        exact_all.push(exact(p[0], p[1]));
        source.push(forcing(p[0], p[1]));
    }
    let m = g.slice_len();
    let mut cfg = SimConfig::new(pair, BoundaryData::from_fn(&g, |t, x| exact(t, x[0])));
    cfg.source = Some(source);
    cfg.initial = Some([exact_all[..m].to_vec(), exact_all[m..2 * m].to_vec()]);
    let u = run_forward(&cfg).unwrap();
    u.values.iter().zip(&exact_all).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let e1 = manufactured_error(41);
    let e2 = manufactured_error(81);
    let e3 = manufactured_error(161);
    assert!(e3 < 1e-3, "fine-grid error {e3:.3e}");
    assert!(e1 / e2 > 3.2 && e2 / e3 > 3.2, "errors {e1:.3e} {e2:.3e} {e3:.3e}");
}

fn greens_defect(n: usize, nx: usize) -> f64 {
    let g = grid_nd(n, nx, 3.0);
    let p1 = bump_pair(&g, 0.0, &[0.8, 0.5, -0.6], 0.7);
    let p2 = bump_pair(&g, 0.1, &[-0.3, 0.2, 0.6], -0.4);
    let fam = ProbeFamily::standard(&g);
    let f = fam.probes[0].sample(&g);
    let late = TimeWindow { start: 1.8, end: 2.9, ramp: 0.4 };
    let h = Probe::Bump { center: [vec![1.0], vec![0.0; n - 1]].concat(), width: 0.5, window: late }.sample(&g);
    let u = run_forward(&SimConfig::new(p1.clone(), f)).unwrap();
    let v = run_backward(&SimConfig::new(p2.clone(), h)).unwrap();
    let tu = dtn_extract(&u, &p1.a).unwrap();
    let tv = dtn_extract(&v, &p2.a).unwrap();
    let r = greens_residual(&u, &v, &tu, &tv, &p1, &p2).unwrap();
    assert!(r.volume.norm() > 1e-3, "volume term too small to be informative: {:?}", r.volume);
    r.defect
}

#[test]
fn greens_formula_defect_shrinks_at_second_order_in_one_dimension() {
    let coarse = greens_defect(1, 201);
    let fine = greens_defect(1, 401);
    assert!(fine < 1e-3, "defect {fine:.3e}");
    assert!(coarse / fine > 3.0, "ratio {:.2}", coarse / fine);
}

#[test]
fn greens_formula_defect_shrinks_at_second_order_in_two_dimensions() {
    let coarse = greens_defect(2, 65);
    let fine = greens_defect(2, 129);
    assert!(fine < 2e-2, "defect {fine:.3e}");
    assert!(coarse / fine > 3.0, "ratio {:.2}", coarse / fine);
}

#[test]
fn free_pulse_probe_is_reproduced_by_the_solver() {
    let g = grid_1d(201, 3.0);
    let probe = Probe::Wave { omega: vec![1.0], k: 4.0, window: TimeWindow { start: 1.1, end: 2.8, ramp: 0.5 } };
    let u = run_forward(&SimConfig::new(PotentialPair::zeros(&g), probe.sample(&g))).unwrap();
    let lat = g.lattice();
    let mut p = vec![0.0; 2];
    let worst = (0..lat.len())
        .map(|f| {
            lat.point(f, &mut p);
            (u.values[f] - probe.value(p[0], &p[1..])).norm()
        })
        .fold(0.0, f64::max);
    assert!(worst < 2e-2, "max deviation {worst:.3e}");
}

fn pulse_trace_error(nx: usize) -> f64 {
    let g = grid_1d(nx, 3.0);
    let probe = Probe::Wave { omega: vec![1.0], k: 3.0, window: TimeWindow { start: 1.1, end: 2.8, ramp: 0.5 } };
    let u = run_forward(&SimConfig::new(PotentialPair::zeros(&g), probe.sample(&g))).unwrap();
    let trace = dtn_extract(&u, &VectorPotential::zeros(&g)).unwrap();
    let nk = trace.nodes.len();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for it in 0..g.nt() {
        let t = g.t(it);
        for (j, node) in trace.nodes.iter().enumerate() {
            let (x, sign) = if node.upper { (1.0, 1.0) } else { (-1.0, -1.0) };
            let dnu = sign * (probe.value(t, &[x + h]) - probe.value(t, &[x - h])) / (2.0 * h);
            worst = worst.max((trace.values[it * nk + j] - dnu).norm());
        }
    }
    worst
}

#[test]
fn free_pulse_neumann_trace_converges_to_the_normal_derivative() {
    let (coarse, fine) = (pulse_trace_error(201), pulse_trace_error(401));
    assert!(fine < 0.2, "trace error {fine:.3e}");
    assert!(coarse / fine > 3.0, "errors {coarse:.3e} {fine:.3e}");
}

#[test]
fn trace_weights_sum_to_the_boundary_measure() {
    let g = grid_nd(2, 11, 1.0);
    let nodes = trace_nodes(&g.spatial());
    let total: f64 = nodes.iter().map(|n| n.weight).sum();
    assert!((total - 8.0).abs() < 1e-12, "perimeter {total}");
    let lateral = lateral_nodes(&g.spatial());
    assert_eq!(lateral.len(), 40);
}

#[test]
fn identical_potentials_have_zero_gap() {
    let g = grid_1d(101, 3.0);
    let p = bump_pair(&g, 0.0, &[0.8, 0.5], 0.3);
    let r = dtn_gap_proxy(&p, &p, &ProbeFamily::standard(&g), 0.5).unwrap();
    assert_eq!(r.proxy, 0.0);
    assert_eq!(r.per_probe.len(), ProbeFamily::standard(&g).probes.len());
}

#[test]
fn gap_proxy_refuses_small_families_and_incompatible_grids() {
    let g = grid_1d(101, 3.0);
    let p = PotentialPair::zeros(&g);
    let mut fam = ProbeFamily::standard(&g);
    fam.probes.truncate(7);
    assert!(matches!(dtn_gap_proxy(&p, &p, &fam, 0.5), Err(Error::Domain(_))));
    let other = PotentialPair::zeros(&grid_1d(150, 3.0));
    assert!(matches!(dtn_gap_proxy(&p, &other, &ProbeFamily::standard(&g), 0.5), Err(Error::ShapeMismatch(_))));
}

#[test]
fn gap_proxy_separates_different_potentials() {
    let g = grid_1d(101, 3.0);
    let p1 = bump_pair(&g, 0.0, &[0.8, 0.5], 0.3);
    let p2 = bump_pair(&g, 0.0, &[0.0, 0.0], 0.0);
    let r = dtn_gap_proxy(&p1, &p2, &ProbeFamily::standard(&g), 0.5).unwrap();
    assert!(r.proxy > 1e-3, "proxy {:.3e}", r.proxy);
    let back = dtn_gap_proxy(&p2, &p1, &ProbeFamily::standard(&g), 0.5).unwrap();
    assert!((back.proxy - r.proxy).abs() < 1e-12 * r.proxy.max(1.0));
}

#[test]
fn standard_family_has_at_least_eight_probes() {
    for n in 1..=2 {
        let g = grid_nd(n, 21, 3.0);
        let fam = ProbeFamily::standard(&g);
        assert!(fam.probes.len() >= 8);
        for probe in &fam.probes {
            let bd = probe.sample(&g);
            assert!(boundary_h1_norm(&bd) > 0.0);
            assert!(bd.level(0).iter().chain(bd.level(1)).all(|z| z.norm() < 1e-12));
        }
    }
}

#[test]
fn cfl_bound_above_one_half_is_rejected() {
    let g = grid_1d(41, 1.0);
    let mut cfg = SimConfig::new(PotentialPair::zeros(&g), BoundaryData::zeros(&g));
    cfg.cfl = 0.8;
    assert!(run_forward(&cfg).is_err());
}

#[test]
fn boundary_data_active_at_the_start_is_rejected() {
    let g = grid_1d(41, 1.0);
    let cfg = SimConfig::new(PotentialPair::zeros(&g), BoundaryData::from_fn(&g, |_, _| Complex64::new(1.0, 0.0)));
    assert!(matches!(run_forward(&cfg), Err(Error::Domain(_))));
}

fn go_case(k: f64) -> f64 {
    let pg = grid_nd(1, 97, 3.0);
    let pair = bump_pair(&pg, 0.0, &[0.6, 0.4], 0.5);
    let dx = 1.0 / 1024.0;
    let eval = SpaceTimeGrid::new(1, vec![5, 1025], vec![1.5 - 2.0 * dx, -0.5], vec![dx, dx]).unwrap();
    let chi = ChiProfile { center: vec![1.5, 0.0], width: 0.3, amplitude: 1.0 };
    let ansatz = go_build(&eval, &pair, &[1.0], k, &chi, &RayOptions::default()).unwrap();
    let r = go_residual(&ansatz, &pair).unwrap();
    assert!(r.transport < 1e-3, "transport residual {:.3e}", r.transport);
    r.normalized
}

#[test]
fn geometric_optics_residual_decays_like_one_over_k() {
    let (r1, r2) = (go_case(40.0), go_case(160.0));
    let slope = (r2 / r1).ln() / 4f64.ln();
    assert!((slope + 1.0).abs() < 0.2, "slope {slope:.3}");
}

#[test]
fn geometric_optics_refuses_unresolved_frequencies() {
    let g = grid_nd(1, 21, 1.0);
    let chi = ChiProfile { center: vec![0.5, 0.0], width: 0.3, amplitude: 1.0 };
    let r = go_build(&g, &PotentialPair::zeros(&g), &[1.0], 100.0, &chi, &RayOptions::default());
    assert!(matches!(r, Err(Error::Resolution(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solution_is_linear_in_the_boundary_data(s in -3.0f64..3.0, k in 1.0f64..6.0) {
        let g = grid_1d(41, 2.0);
        let pair = bump_pair(&g, 0.0, &[0.5, -0.4], 0.2);
        let probe = Probe::Wave { omega: vec![1.0], k, window: TimeWindow { start: 1.1, end: 2.5, ramp: 0.4 } };
        let bd = probe.sample(&g);
        let u = run_forward(&SimConfig::new(pair.clone(), bd.clone())).unwrap();
        let us = run_forward(&SimConfig::new(pair, bd.scaled(s))).unwrap();
        for (a, b) in u.values.iter().zip(&us.values) {
            prop_assert!((a * s - b).norm() <= 1e-10 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn chi_profile_is_constant_along_light_rays(t in -1.0f64..1.0, x in -1.0f64..1.0, s in -2.0f64..2.0, sign in prop::bool::ANY) {
        let w = if sign { 1.0 } else { -1.0 };
        let chi = ChiProfile { center: vec![0.2, -0.1], width: 0.4, amplitude: 1.3 };
        let a = chi.value(&[t, x], &[w]);
        let b = chi.value(&[t + s, x + s * w], &[w]);
        prop_assert!((a - b).abs() <= 1e-12);
    }
}
