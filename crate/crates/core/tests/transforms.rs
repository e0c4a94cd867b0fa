use std::f64::consts::{E, PI};

use num_complex::Complex64;
use proptest::prelude::*;

use raykit_core::catalog::{AnalyticPotentialSpec, Bump, PotentialKind, Profile};
use raykit_core::experiment::divfree_entry;
use raykit_core::field::gradient;
use raykit_core::gauge::{reconstruct_phi, GaugeOptions};
use raykit_core::grid::SpaceTimeGrid;
use raykit_core::interp::Interp;
use raykit_core::ray::{exp_identity, partial_ray_integral, ray_field, ray_transform, ray_transform_scalar, ray_transform_with, LightRay, RayOptions};
use raykit_core::slice::{cone_support_test, perp_rank, slice_identity, solve_omega};
use raykit_core::stability::{
    build_direction_system, c4, harmonic_measure, harmonic_measure_infimum, ray_bound_from_exp, reconstruct_spectrum, reference_volume,
    solve_balancing, stability_bound, StabilityInputs,
};
use raykit_core::spectral::dft_real;
use raykit_core::tomography::{divergence_ratio, reconstruct_divfree, reconstruct_scalar, TomographyOptions};
use raykit_core::Error;

fn box_grid(n: usize, nodes: usize, half: f64) -> SpaceTimeGrid {
    SpaceTimeGrid::uniform(n, nodes, (-half, half), nodes, (-half, half)).unwrap()
}

/// `∫ exp(−Σ((p + s d − c)/w)²) ds = √(π/α) exp(β²/α − γ)`.
fn gaussian_line_integral(p: &[f64], d: &[f64], c: &[f64], w: &[f64]) -> f64 {
    let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
    for a in 0..p.len() {
        let (u, v) = ((p[a] - c[a]) / w[a], d[a] / w[a]);
        alpha += v * v;
        beta += u * v;
        gamma += u * u;
    }
    (PI / alpha).sqrt() * (beta * beta / alpha - gamma).exp()
}

fn gaussian_spec(center: Vec<f64>, widths: Vec<f64>, a: Vec<f64>, v: f64) -> AnalyticPotentialSpec {
    let n = center.len() - 1;
    let bump = Bump { center, widths, amplitude: 1.0, profile: Profile::Gaussian, cutoff: None };
    AnalyticPotentialSpec::new(n, PotentialKind::GaussianBump { bump, a, v }).unwrap()
}

#[test]
fn ray_transform_of_a_gaussian_matches_the_closed_form() {
    let grid = box_grid(2, 96, 2.0);
    let (c, w) = (vec![0.1, -0.2, 0.15], vec![0.3, 0.35, 0.25]);
    let amps = vec![0.7, -0.4, 1.1];
    let (a, v) = gaussian_spec(c.clone(), w.clone(), amps.clone(), 0.6).sample(&grid).unwrap();
    for (base, theta) in [([0.0, 0.1, -0.3], 0.4), ([-0.5, -0.2, 0.4], 2.2), ([0.3, 0.0, 0.0], 4.0)] {
        let omega = vec![f64::cos(theta), f64::sin(theta)];
        let ray = LightRay::new(base.to_vec(), omega.clone()).unwrap();
        let g = gaussian_line_integral(&base, &ray.direction(), &c, &w);
        let exact = (amps[0] + omega[0] * amps[1] + omega[1] * amps[2]) * g;
        let got = ray_transform(&a, &ray).unwrap();
        assert!((got.value - exact).abs() < 2e-5, "{} vs {exact}", got.value);
        let sv = ray_transform_scalar(&v, &ray, &RayOptions::default()).unwrap();
        assert!((sv.value - 0.6 * g).abs() < 2e-5);
    }
}

#[test]
fn linear_interpolation_converges_at_second_order() {
    let (c, w) = (vec![0.0, 0.1, -0.1], vec![0.3; 3]);
    let ray = LightRay::new(vec![0.05, 0.0, 0.02], vec![0.6, 0.8]).unwrap();
    let exact = gaussian_line_integral(&ray.base, &ray.direction(), &c, &w);
    let err = |nodes: usize| {
        let grid = box_grid(2, nodes, 1.5);
        let (a, _) = gaussian_spec(c.clone(), w.clone(), vec![1.0, 0.0, 0.0], 0.0).sample(&grid).unwrap();
        (ray_transform_with(&a, &ray, &RayOptions::with_interp(Interp::Linear)).unwrap().value - exact).abs()
    };
    let (e1, e2) = (err(61), err(121));
    assert!(e1 / e2 > 3.3, "errors {e1:.3e} {e2:.3e}");
}

#[test]
fn ray_leaving_the_grid_through_support_is_refused() {
    let grid = box_grid(2, 40, 1.0);
    let (a, _) = gaussian_spec(vec![0.0; 3], vec![0.4; 3], vec![1.0, 0.0, 0.0], 0.0).sample(&grid).unwrap();
    let ray = LightRay::new(vec![0.0, 0.0, 0.0], vec![1.0, 0.0]).unwrap();
    assert!(matches!(ray_transform(&a, &ray), Err(Error::Truncation { .. })));
}

#[test]
fn light_rays_require_unit_directions() {
    assert!(matches!(LightRay::new(vec![0.0, 0.0, 0.0], vec![1.0, 0.1]), Err(Error::Domain(_))));
    assert!(matches!(LightRay::new(vec![0.0, 0.0], vec![1.0, 0.0]), Err(Error::ShapeMismatch(_))));
}

#[test]
fn partial_integrals_split_the_full_transform() {
    let grid = box_grid(2, 96, 2.0);
    let (a, _) = gaussian_spec(vec![0.1, -0.2, 0.15], vec![0.3; 3], vec![0.7, -0.4, 1.1], 0.0).sample(&grid).unwrap();
    let omega = vec![0.8, -0.6];
    let point = vec![0.1, -0.1, 0.2];
    let ray = LightRay::new(point.clone(), omega.clone()).unwrap();
    let full = ray_transform(&a, &ray).unwrap().value;
    let head = partial_ray_integral(&a, &point, &omega, &RayOptions::default()).unwrap().value;
    let far = ray.at(3.0);
    let all = partial_ray_integral(&a, &far, &omega, &RayOptions::default()).unwrap().value;
    assert!((all - full).abs() < 1e-8);
    assert!(head.abs() < full.abs() + 1e-12 && head.abs() > 0.0);
}

#[test]
fn gauge_reconstruction_recovers_phi() {
    let grid = box_grid(2, 48, 1.0);
    let bump = Bump { center: vec![0.0, 0.1, -0.05], widths: vec![0.2; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.7) };
    let phi = bump.sample(&grid).unwrap();
    let (a, _) = AnalyticPotentialSpec::new(2, PotentialKind::GradientOfBump { bump }).unwrap().sample(&grid).unwrap();
    let cand = reconstruct_phi(&a, &GaugeOptions { tol_ray_rel: 1e-3, ..GaugeOptions::default() }).unwrap();
    let err = cand.phi.values().iter().zip(phi.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(err < 1e-2 * phi.max_abs(), "sup error {err:.3e}");
}

#[test]
fn non_gauge_potential_is_refused() {
    let grid = box_grid(2, 40, 1.0);
    let bump = Bump { center: vec![0.0; 3], widths: vec![0.2; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.7) };
    let (a, _) = AnalyticPotentialSpec::new(2, PotentialKind::GaussianBump { bump, a: vec![1.0, 0.0, 0.0], v: 0.0 }).unwrap().sample(&grid).unwrap();
    assert!(matches!(reconstruct_phi(&a, &GaugeOptions::default()), Err(Error::NotAGauge { .. })));
    let few = GaugeOptions { n_probes: 10, ..GaugeOptions::default() };
    assert!(matches!(reconstruct_phi(&a, &few), Err(Error::Domain(_))));
}

#[test]
fn slice_identity_holds_for_a_gaussian_bump() {
    let grid = box_grid(2, 64, 1.0);
    let bump = Bump { center: vec![0.0, 0.05, -0.1], widths: vec![0.15; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.7) };
    let (a, _) = AnalyticPotentialSpec::new(2, PotentialKind::GaussianBump { bump, a: vec![1.0, 0.5, -0.7], v: 0.0 }).unwrap().sample(&grid).unwrap();
    let rf = ray_field(&a, &[0.6, 0.8], &grid.spatial(), &RayOptions::default()).unwrap();
    let rep = slice_identity(&rf, &a).unwrap();
    assert!(rep.n_points > 100);
    assert!(rep.max_rel_mismatch < 1e-2, "mismatch {:.3e}", rep.max_rel_mismatch);
}

#[test]
fn gradients_have_spectra_vanishing_on_every_slice() {
    let grid = box_grid(2, 48, 1.0);
    let bump = Bump { center: vec![0.0, 0.05, -0.1], widths: vec![0.25; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.7) };
    let a = gradient(&bump.sample(&grid).unwrap());
    let rep = cone_support_test(&a);
    assert!(rep.n_points > 0);
    assert!(rep.max_rel < 5e-2, "{:.3e}", rep.max_rel);
}

#[test]
fn complement_of_the_direction_span_is_one_dimensional() {
    for (tau, xi) in [(0.3, vec![1.0, -0.4]), (0.0, vec![0.2, 0.5, -1.0]), (-0.4, vec![0.9, 0.1, 0.3])] {
        assert_eq!(perp_rank(tau, &xi, 12).unwrap(), 1);
    }
    assert!(matches!(perp_rank(0.0, &[1.0, 0.0], 2), Err(Error::Domain(_))));
}

#[test]
fn direction_system_solves_for_a_divergence_free_spectrum() {
    let (tau, xi) = (0.2, vec![0.7, -0.5, 0.3]);
    let sys = build_direction_system(tau, &xi).unwrap();
    let mut ahat = vec![Complex64::new(0.3, -0.2), Complex64::new(0.1, 0.4), Complex64::new(-0.5, 0.1), Complex64::new(0.0, 0.0)];
    // Impose tau Â0 + xi·Â = 0 by choosing Â3.
    let s = tau * ahat[0] + xi[0] * ahat[1] + xi[1] * ahat[2];
    ahat[3] = -s / xi[2];
    let g: Vec<Complex64> = sys.omegas.iter().map(|w| ahat[0] + w[0] * ahat[1] + w[1] * ahat[2] + w[2] * ahat[3]).collect();
    let back = reconstruct_spectrum(&g, None, tau, &xi).unwrap();
    for (x, y) in back.iter().zip(&ahat) {
        assert!((x - y).norm() < 1e-12);
    }
}

#[test]
fn direction_system_is_refused_outside_the_working_region() {
    assert!(matches!(build_direction_system(0.8, &[1.0, 0.0]), Err(Error::ConeRegion(_))));
    assert!(matches!(build_direction_system(0.0, &[0.0, 0.0, 0.0, 1.0]), Err(Error::Conditioning { .. })));
    assert!(reference_volume(2).unwrap() > 0.0);
}

#[test]
fn harmonic_measure_minimum_matches_a_brute_force_search() {
    let a = 1.0;
    let h = a * PI;
    let (z, value) = harmonic_measure_infimum(a, h).unwrap();
    let brute = (1..200000).map(|i| harmonic_measure(i as f64 * 1e-4, a, h).unwrap()).fold(f64::INFINITY, f64::min);
    assert!((value - brute).abs() < 1e-9, "{value} vs {brute}");
    assert!((z - E.sqrt()).abs() < 1e-12);
    let closed = 2.0 / PI * (PI / 2.0 - ((E - 1.0) / (2.0 * E.sqrt())).atan());
    assert!((value - closed).abs() < 1e-14);
    assert!(value > 2.0 / 3.0 && value <= 1.0);
}

#[test]
fn inversion_constant_bounds_small_phases() {
    assert_eq!(c4(0.0).unwrap(), 1.0);
    assert!(matches!(c4(2.0 * PI), Err(Error::Regime(_))));
    let alpha = 2.5;
    for beta in [-2.5, -1.0, 0.3, 2.4] {
        let b = ray_bound_from_exp(&[Complex64::from_polar(1.0, beta) - 1.0], alpha).unwrap()[0];
        assert!(f64::abs(beta) <= b + 1e-12, "|{beta}| > {b}");
    }
}

#[test]
fn stability_bound_rejects_large_gaps_and_handles_zero() {
    assert!(matches!(stability_bound(&StabilityInputs::new(0.5, 2)), Err(Error::Regime(_))));
    assert!(matches!(stability_bound(&StabilityInputs::new(-1.0, 2)), Err(Error::Domain(_))));
    assert_eq!(stability_bound(&StabilityInputs::new(0.0, 2)).unwrap().bound, 0.0);
}

#[test]
fn divergence_free_reconstruction_is_accurate_on_a_small_grid() {
    let grid = box_grid(2, 64, 1.0);
    let (a, _) = divfree_entry().sample(&grid).unwrap();
    assert!(divergence_ratio(&a) < 0.05);
    let rec = reconstruct_divfree(&a, &TomographyOptions { n_angles: 41, ..TomographyOptions::default() }).unwrap();
    let lat = grid.lattice();
    let (mut num, mut den) = (0.0, 0.0);
    for (j, comp) in a.components().iter().enumerate() {
        let s = dft_real(lat, comp);
        for (i, &f) in rec.nodes.iter().enumerate() {
            num += (rec.values[i][j] - s.values[f]).norm_sqr();
            den += s.values[f].norm_sqr();
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel < 5e-2, "relative error {rel:.3e}");
}

#[test]
fn non_divergence_free_input_is_refused() {
    let grid = box_grid(2, 32, 1.0);
    let bump = Bump { center: vec![0.0; 3], widths: vec![0.3; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.7) };
    let (a, _) = AnalyticPotentialSpec::new(2, PotentialKind::GaussianBump { bump, a: vec![1.0, 1.0, 0.0], v: 0.0 }).unwrap().sample(&grid).unwrap();
    assert!(reconstruct_divfree(&a, &TomographyOptions::default()).is_err());
}

#[test]
fn scalar_reconstruction_recovers_a_small_potential() {
    let grid = SpaceTimeGrid::uniform(2, 64, (-2.3, 2.3), 64, (-1.0, 1.0)).unwrap();
    let bump = Bump { center: vec![0.0; 3], widths: vec![0.5, 0.2, 0.2], amplitude: 1.0, profile: Profile::Hat, cutoff: Some(0.7) };
    let v = bump.sample(&grid).unwrap();
    let rec = reconstruct_scalar(&v, &TomographyOptions { n_angles: 41, periods: 1, ..TomographyOptions::default() }).unwrap();
    let num: f64 = rec.values.iter().zip(v.values()).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = v.values().iter().map(|b| b * b).sum();
    let rel = (num / den).sqrt();
    assert!(rel < 0.1, "relative error {rel:.3e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solved_directions_are_unit_and_on_the_slice(
        xi in prop::collection::vec(-2.0f64..2.0, 3),
        frac in -0.95f64..0.95,
        theta in 0.0f64..(2.0 * PI),
    ) {
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let tau = frac * norm;
        let sol = solve_omega(tau, &xi, &[theta.cos(), theta.sin()]).unwrap();
        let wn = sol.omega.iter().map(|w| w * w).sum::<f64>().sqrt();
        let slice = tau + sol.omega.iter().zip(&xi).map(|(w, x)| w * x).sum::<f64>();
        prop_assert!((wn - 1.0).abs() < 1e-12);
        prop_assert!(slice.abs() < 1e-12 * (1.0 + norm));
    }

    #[test]
    fn direction_system_determinant_stays_above_the_floor(
        xi in prop::collection::vec(-2.0f64..2.0, 2..=3),
        frac in -0.5f64..0.5,
    ) {
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let sys = build_direction_system(frac * norm, &xi).unwrap();
        let floor = reference_volume(xi.len()).unwrap() * (PI / 8.0).sin();
        prop_assert!(sys.det_abs >= floor - 1e-9);
    }

    #[test]
    fn balancing_identity_is_solved(n in 1usize..4, rhs in 0.1f64..200.0) {
        let rho = solve_balancing(n, rhs);
        let lhs = (3 * n + 5) as f64 * rho.ln() + 2.0 * PI * rho;
        prop_assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn stability_bound_decreases_with_the_gap(g in 1e-12f64..0.3, factor in 0.01f64..0.99) {
        let big = stability_bound(&StabilityInputs::new(g, 2)).unwrap().bound;
        let small = stability_bound(&StabilityInputs::new(g * factor, 2)).unwrap().bound;
        prop_assert!(small < big);
    }

    #[test]
    fn gradients_are_annihilated_by_light_rays(t in -0.3f64..0.3, x in -0.3f64..0.3, y in -0.3f64..0.3, theta in 0.0f64..(2.0 * PI)) {
        let grid = box_grid(2, 64, 1.0);
        let bump = Bump { center: vec![0.0, 0.1, -0.05], widths: vec![0.2; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: Some(0.7) };
        let (a, _) = AnalyticPotentialSpec::new(2, PotentialKind::GradientOfBump { bump }).unwrap().sample(&grid).unwrap();
        let ray = LightRay::new(vec![t, x, y], vec![theta.cos(), theta.sin()]).unwrap();
        let r = ray_transform(&a, &ray).unwrap();
        prop_assert!(r.value.abs() < 1e-4 * a.max_abs());
        prop_assert!(exp_identity(&a, &ray).unwrap().norm() < 1e-4 * a.max_abs());
    }
}
