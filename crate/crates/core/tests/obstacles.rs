use std::f64::consts::PI;

use proptest::prelude::*;

use raykit_core::catalog::{AnalyticPotentialSpec, Bump, PotentialKind, Profile};
use raykit_core::experiment::{winding_case, winding_scene};
use raykit_core::field::gradient;
use raykit_core::grid::SpaceTimeGrid;
use raykit_core::obstacles::{
    build_loop, g1_check, loop_integral, ray_hits, theta_gauge, winding_detect, winding_report, wrap_angle, G1Outcome, Halfspace,
    Obstacle, Scene, TOL_FLAT_REL,
};
use raykit_core::ray::LightRay;
use raykit_core::Error;

fn winding_grid() -> SpaceTimeGrid {
    SpaceTimeGrid::new(2, vec![16, 65, 65], vec![-0.5, -1.0, -1.0], vec![0.1, 2.0 / 64.0, 2.0 / 64.0]).unwrap()
}

fn theta_field(m: f64) -> raykit_core::field::VectorPotential {
    let spec = AnalyticPotentialSpec::new(2, PotentialKind::WindingTheta { center: vec![0.1, -0.05], m, core_inner: 0.08, core_outer: 0.18 }).unwrap();
    spec.sample(&winding_grid()).unwrap().0
}

fn unit_cube_scene() -> Scene {
    let hs = (0..3)
        .flat_map(|a| {
            [1.0, -1.0].map(|s| {
                let mut normal = vec![0.0; 3];
                normal[a] = s;
                Halfspace { normal, offset: 0.5 }
            })
        })
        .collect();
    Scene::new(vec![-3.0; 3], vec![3.0; 3], vec![Obstacle::polytope(hs).unwrap()]).unwrap()
}

#[test]
fn ray_through_a_ball_enters_where_the_quadratic_says() {
    let balls = vec![Obstacle::ball(vec![0.0, 0.0], 0.5).unwrap()];
    let ray = LightRay::new(vec![0.0, -2.0, 0.3], vec![1.0, 0.0]).unwrap();
    let hit = ray_hits(&ray, &balls).expect("ray crosses the ball");
    let expected = 2.0 - (0.25f64 - 0.09).sqrt();
    assert!((hit.s - expected).abs() < 1e-12, "entry {} vs {expected}", hit.s);
}

#[test]
fn tangent_ray_counts_as_a_hit_and_a_distant_ray_misses() {
    let balls = vec![Obstacle::ball(vec![0.0, 0.0], 0.5).unwrap()];
    let tangent = LightRay::new(vec![0.0, -2.0, 0.5], vec![1.0, 0.0]).unwrap();
    assert!(ray_hits(&tangent, &balls).is_some());
    let away = LightRay::new(vec![0.0, -2.0, 0.51], vec![1.0, 0.0]).unwrap();
    assert!(ray_hits(&away, &balls).is_none());
}

#[test]
fn first_obstacle_along_the_ray_is_reported() {
    let obs = vec![Obstacle::ball(vec![1.0, 0.0], 0.2).unwrap(), Obstacle::ball(vec![-1.0, 0.0], 0.2).unwrap()];
    let ray = LightRay::new(vec![0.0, -3.0, 0.0], vec![1.0, 0.0]).unwrap();
    assert_eq!(ray_hits(&ray, &obs).unwrap().obstacle, 1);
}

#[test]
fn cube_polytope_contains_its_center_and_not_its_exterior() {
    let scene = unit_cube_scene();
    let cube = &scene.obstacles[0];
    assert!(cube.contains(&[0.0, 0.0, 0.0]));
    assert!(cube.contains(&[0.49, -0.49, 0.2]));
    assert!(!cube.contains(&[0.51, 0.0, 0.0]));
    assert!((cube.circumradius() - 0.75f64.sqrt()).abs() < 1e-12);
}

#[test]
fn plane_is_found_next_to_a_single_ball() {
    let scene = Scene::new(vec![-2.0; 3], vec![2.0; 3], vec![Obstacle::ball(vec![0.0, 0.0, 0.0], 0.5).unwrap()]).unwrap();
    let x = [1.0, 0.2, 0.0];
    let G1Outcome::Found(plane) = g1_check(&x, &scene).unwrap() else { panic!("expected a plane") };
    let dist = plane.normal.iter().zip(&x).map(|(n, xi)| n * (0.0 - xi)).sum::<f64>().abs();
    assert!(dist > 0.5, "plane passes {dist} from the center");
    assert!((plane.clearance - (dist - 0.5)).abs() < 1e-9);
    let dots: Vec<f64> = plane.span.iter().map(|s| s.iter().zip(&plane.normal).map(|(a, b)| a * b).sum()).collect();
    assert!(dots.iter().all(|d| d.abs() < 1e-12));
}

#[test]
fn point_surrounded_by_six_balls_has_no_free_plane() {
    let mut obs = Vec::new();
    for a in 0..3 {
        for s in [1.0, -1.0] {
            let mut c = vec![0.0; 3];
            c[a] = s;
            obs.push(Obstacle::ball(c, 0.8).unwrap());
        }
    }
    let scene = Scene::new(vec![-3.0; 3], vec![3.0; 3], obs).unwrap();
    match g1_check(&[0.0, 0.0, 0.0], &scene).unwrap() {
        G1Outcome::Blocked { min_penetration } => assert!(min_penetration > 0.0),
        other => panic!("expected a blocked point, got {other:?}"),
    }
}

#[test]
fn plane_search_rejects_points_inside_obstacles_and_other_dimensions() {
    let scene = unit_cube_scene();
    assert!(matches!(g1_check(&[0.1, 0.0, 0.0], &scene), Err(Error::Domain(_))));
    let flat = winding_scene().unwrap();
    assert!(matches!(g1_check(&[0.9, -0.9], &flat), Err(Error::Domain(_))));
}

#[test]
fn built_loop_is_closed_light_like_and_unobstructed() {
    let scene = winding_scene().unwrap();
    for k in 0..scene.obstacles.len() {
        let lp = build_loop(k, &scene, 0.1).unwrap();
        lp.validate().unwrap();
        assert!(lp.blocking(&scene).is_none());
        assert_eq!(lp.vertices.first(), lp.vertices.last());
    }
}

#[test]
fn loop_around_a_cube_in_three_dimensions_is_valid() {
    let scene = unit_cube_scene();
    let lp = build_loop(0, &scene, 0.2).unwrap();
    lp.validate().unwrap();
    assert!(lp.blocking(&scene).is_none());
}

#[test]
fn exact_gradients_have_vanishing_loop_integrals() {
    let grid = winding_grid();
    let bump = Bump { center: vec![0.2, 0.3, 0.0], widths: vec![0.3; 3], amplitude: 0.8, profile: Profile::Gaussian, cutoff: Some(0.6) };
    let a = gradient(&bump.sample(&grid).unwrap());
    let lp = build_loop(0, &winding_scene().unwrap(), 0.15).unwrap();
    let value = loop_integral(&a, &lp).unwrap();
    assert!(value.abs() < 1e-3, "integral {value:.3e}");
}

#[test]
fn winding_numbers_are_recovered_with_and_without_a_gauge_perturbation() {
    for row in winding_case(&[-2, -1, 0, 1, 2]).unwrap() {
        assert_eq!(row.detected, Some(row.m));
        assert_eq!(row.perturbed_detected, Some(row.m));
        assert!(row.residual < 1e-3 && row.perturbed_residual < 1e-3, "{row:?}");
    }
}

#[test]
fn refined_and_nested_loops_give_the_same_integral() {
    let a = theta_field(1.0);
    let scene = winding_scene().unwrap();
    let lp = build_loop(0, &scene, 0.15).unwrap();
    let base = loop_integral(&a, &lp).unwrap();
    let refined = loop_integral(&a, &lp.refined(4)).unwrap();
    assert!((base - refined).abs() < 1e-4, "{base} vs {refined}");
    let inner = loop_integral(&a, &build_loop(0, &scene, 0.08).unwrap()).unwrap();
    assert!((base - inner).abs() < 1e-4, "{base} vs {inner}");
    let shifted = loop_integral(&a, &lp.shifted_in_time(0.3)).unwrap();
    assert!((base - shifted).abs() < 1e-4, "{base} vs {shifted}");
}

#[test]
fn curved_field_is_refused_by_detection_but_reported() {
    let grid = winding_grid();
    let bump = Bump { center: vec![0.2, 0.45, -0.05], widths: vec![0.3; 3], amplitude: 1.0, profile: Profile::Gaussian, cutoff: None };
    let spec = AnalyticPotentialSpec::new(2, PotentialKind::GaussianBump { bump, a: vec![0.0, 1.0, 0.0], v: 0.0 }).unwrap();
    let a = spec.sample(&grid).unwrap().0;
    let lp = build_loop(0, &winding_scene().unwrap(), 0.15).unwrap();
    assert!(matches!(winding_detect(&a, &lp, TOL_FLAT_REL), Err(Error::NotFlat { .. })));
    let r = winding_report(&a, &lp, TOL_FLAT_REL).unwrap();
    assert_eq!(r.m, None);
    assert!(r.max_curl > r.tol_flat);
}

#[test]
fn theta_gauge_has_unit_modulus_and_multivalued_phase() {
    let scene = winding_scene().unwrap();
    let points = vec![vec![0.1, -0.05], vec![0.7, 0.6]];
    let tg = theta_gauge(&scene, &winding_grid(), &points, &[1.0, -2.0]).unwrap();
    assert!(tg.modulus_defect < 1e-9, "modulus defect {:.3e}", tg.modulus_defect);
    assert!(tg.loop_consistency < 1e-9);
    let base = tg.base().to_vec();
    let target = vec![0.1, 0.6];
    let below_right = vec![base.clone(), vec![0.9, -0.9], vec![0.5, 0.0], target.clone()];
    let left = vec![base.clone(), vec![-0.9, 0.6], target.clone()];
    let p1 = tg.phase_along(&scene, &below_right).unwrap();
    let p2 = tg.phase_along(&scene, &left).unwrap();
    let turns = (p1 - p2) / (2.0 * PI);
    assert!((turns - turns.round()).abs() < 1e-6 && turns.round() != 0.0, "phase difference {turns} turns");
}

#[test]
fn theta_gauge_phase_refuses_paths_through_obstacles() {
    let scene = winding_scene().unwrap();
    let points = vec![vec![0.1, -0.05], vec![0.7, 0.6]];
    let tg = theta_gauge(&scene, &winding_grid(), &points, &[1.0, 1.0]).unwrap();
    let path = vec![tg.base().to_vec(), vec![0.5, 0.4]];
    assert!(matches!(tg.phase_along(&scene, &path), Err(Error::Geometry(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrapped_angles_stay_in_range_and_keep_the_phase(x in -100.0f64..100.0) {
        let w = wrap_angle(x);
        prop_assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
        prop_assert!(((x - w) / (2.0 * PI) - ((x - w) / (2.0 * PI)).round()).abs() < 1e-9);
    }

    #[test]
    fn missed_rays_never_pass_inside(y in -1.5f64..1.5, theta in 0.0f64..(2.0 * PI)) {
        let balls = vec![Obstacle::ball(vec![0.2, -0.1], 0.4).unwrap()];
        let omega = vec![theta.cos(), theta.sin()];
        let ray = LightRay::new(vec![0.0, -2.0, y], omega.clone()).unwrap();
        let inside = (0..4000).any(|i| {
            let s = -5.0 + 10.0 * i as f64 / 4000.0;
            balls[0].contains(&[-2.0 + s * omega[0], y + s * omega[1]])
        });
        if inside {
            prop_assert!(ray_hits(&ray, &balls).is_some());
        }
        if let Some(hit) = ray_hits(&ray, &balls) {
            let p = [-2.0 + hit.s * omega[0], y + hit.s * omega[1]];
            let r = ((p[0] - 0.2).powi(2) + (p[1] + 0.1).powi(2)).sqrt();
            prop_assert!((r - 0.4).abs() < 1e-9);
        }
    }

    #[test]
    fn loop_integral_is_invariant_under_leg_subdivision(parts in 1usize..6, m in -3i64..=3) {
        let a = theta_field(m as f64);
        let lp = build_loop(0, &winding_scene().unwrap(), 0.15).unwrap();
        let base = loop_integral(&a, &lp).unwrap();
        let refined = loop_integral(&a, &lp.refined(parts)).unwrap();
        prop_assert!((base - refined).abs() < 1e-4);
    }
}
