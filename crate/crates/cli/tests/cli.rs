use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn raykit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_raykit")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn write(dir: &Path, name: &str, value: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(value).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn scene_with_ball() -> Value {
    json!({
        "box_lo": [-2.0, -2.0, -2.0],
        "box_hi": [2.0, 2.0, 2.0],
        "obstacles": [{"kind": "ball", "center": [0.0, 0.0, 0.0], "radius": 0.5}]
    })
}

#[test]
fn stability_prints_a_finite_bound() {
    let v = stdout_json(&raykit(&["stability", "--gap", "1e-4", "--n", "2"]));
    let text = v.to_string();
    assert!(text.contains("bound"), "{text}");
}

#[test]
fn stability_rejects_a_negative_gap_with_exit_code_two() {
    let out = raykit(&["stability", "--gap", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn obstacles_finds_a_plane_away_from_a_single_ball() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "scene.json", &scene_with_ball());
    let v = stdout_json(&raykit(&["obstacles", "--scene", &scene, "--check-g1", "1.2,0,0"]));
    assert!(v.get("found").is_some() || v.to_string().contains("normal"), "{v}");
}

#[test]
fn obstacles_reports_a_point_inside_an_obstacle() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write(dir.path(), "scene.json", &scene_with_ball());
    let out = raykit(&["obstacles", "--scene", &scene, "--check-g1", "0.1,0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_exits_with_code_two() {
    let out = raykit(&["transform", "--field", "/nonexistent/a.stpf", "--base", "0,0", "--omega", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}

#[test]
fn experiment_with_passing_pipelines_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "exp.json",
        &json!({
            "pipelines": [{"pipeline": "stability_sweep", "gaps": [1e-2, 1e-4, 1e-6]}],
            "seed": 3,
            "out_dir": "out"
        }),
    );
    let out = raykit(&["experiment", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let reports: Vec<_> = std::fs::read_dir(dir.path().join("out")).unwrap().collect();
    assert!(!reports.is_empty());
}

#[test]
fn experiment_with_an_impossible_tolerance_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "exp.json",
        &json!({
            "pipelines": [{"pipeline": "gauge_roundtrip", "n": 24, "tol": 1e-30, "tol_ray_rel": 1.0}],
            "out_dir": "out"
        }),
    );
    let out = raykit(&["experiment", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sim_on_a_catalog_potential_writes_the_solution_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sim.json",
        &json!({
            "potentials": {
                "source": "catalog",
                "spec": {"n_space": 1, "kind": {"kind": "gaussian_bump",
                    "bump": {"center": [1.5, 0.0], "widths": [0.3, 0.3], "amplitude": 1.0},
                    "a": [0.5, 0.3], "v": 0.2}},
                "grid": {"n_space": 1, "nt": 241, "t": [0.0, 3.0], "nx": 61, "x": [-1.0, 1.0]}
            },
            "boundary": {"kind": "wave", "omega": [1.0], "k": 3.0,
                "window": {"start": 1.1, "end": 3.5, "ramp": 0.5}}
        }),
    );
    let out_path = dir.path().join("u.stpf");
    let dtn_path = dir.path().join("dtn.json");
    let v = stdout_json(&raykit(&[
        "sim", "--config", &cfg, "--out", out_path.to_str().unwrap(), "--dtn", dtn_path.to_str().unwrap(),
    ]));
    assert!(v["trace_l2"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read(&out_path).unwrap().starts_with(b"STPF/1\n"));
    let trace: Value = serde_json::from_slice(&std::fs::read(&dtn_path).unwrap()).unwrap();
    assert_eq!(trace["nodes"].as_array().unwrap().len(), 2);
}

#[test]
fn catalog_samples_are_cached_in_the_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cfg = write(
        dir.path(),
        "go.json",
        &json!({
            "potentials": {
                "source": "catalog",
                "spec": {"n_space": 1, "kind": {"kind": "zero"}},
                "grid": {"n_space": 1, "nt": 33, "t": [-1.0, 1.0], "nx": 33, "x": [-1.0, 1.0]}
            },
            "grid": {"n_space": 1, "nt": 5, "t": [-0.02, 0.02], "nx": 201, "x": [-0.5, 0.5]},
            "chi": {"center": [0.0, 0.0], "width": 0.2, "amplitude": 1.0}
        }),
    );
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_raykit"))
            .args(["go", "--config", &cfg, "--omega", "1", "--k", "20"])
            .env("RAYKIT_DATA_DIR", &cache)
            .output()
            .unwrap()
    };
    let first = stdout_json(&run());
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 2);
    let second = stdout_json(&run());
    assert_eq!(first, second);
}
