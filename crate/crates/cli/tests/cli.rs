//! End-to-end runs of every subcommand on a small scene.

use std::fs;
use std::path::{Path, PathBuf};

use cogen_cli::{run, EXIT_OK, EXIT_ORACLE_MISMATCH, EXIT_VALIDATION};

fn write_scene(dir: &Path, max_iters: usize) -> PathBuf {
    let out = dir.join("out").display().to_string();
    let cache = dir.join("cache").display().to_string();
    let text = format!(
        r#"{{
        "dimension": 2,
        "body1": {{
            "domain": {{ "origin": [-0.5, -0.5], "dims": [20, 20], "spacing": 0.05 }},
            "shape": {{ "box": {{ "min": [-0.5, -0.5], "max": [0.5, 0.5] }} }}
        }},
        "body2": {{
            "domain": {{ "origin": [0.25, -0.5], "dims": [20, 20], "spacing": 0.05 }},
            "shape": {{ "box": {{ "min": [0.25, -0.5], "max": [1.25, 0.5] }} }}
        }},
        "motion": {{ "builtin": {{ "name": "counter_rotation",
                                   "center1": [0.0, 0.0], "center2": [0.75, 0.0] }} }},
        "timesteps": 16,
        "gamma": 0.5,
        "optimizer": {{ "max_iters": {max_iters} }},
        "output_dir": "{out}",
        "cache_path": "{cache}"
    }}"#
    );
    let path = dir.join("scene.json");
    fs::write(&path, text).unwrap();
    path
}

fn cogen(args: &[&str]) -> i32 {
    let mut argv = vec!["cogen".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    run(argv)
}

#[test]
fn precompute_then_optimize_uses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), 120);
    let scene = scene.to_str().unwrap();

    assert_eq!(cogen(&["precompute", "--scene", scene]), EXIT_OK);
    assert!(dir.path().join("cache/w12.cogw").is_file());
    assert!(dir.path().join("cache/w21.cogw").is_file());

    assert_eq!(cogen(&["optimize", "--scene", scene]), EXIT_OK);
    let out = dir.path().join("out");
    assert!(out.join("rho1.bin").is_file());
    assert!(out.join("rho2.bin").is_file());
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(csv.starts_with("iter,v1,v2,g21,g12,h,delta\n"));
    assert!(csv.lines().count() > 1);
}

#[test]
fn stale_cache_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scene_path = write_scene(dir.path(), 40);
    let scene = scene_path.to_str().unwrap();
    assert_eq!(cogen(&["precompute", "--scene", scene]), EXIT_OK);

    // change the motion: the cached matrices no longer match
    let text = fs::read_to_string(&scene_path).unwrap();
    fs::write(&scene_path, text.replace("[0.75, 0.0]", "[0.7, 0.0]")).unwrap();
    assert_eq!(cogen(&["optimize", "--scene", scene]), EXIT_VALIDATION);
}

#[test]
fn gamma_sweep_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), 60);
    let scene = scene.to_str().unwrap();
    assert_eq!(
        cogen(&["gamma-sweep", "--scene", scene, "--gammas", "0:1:0.5"]),
        EXIT_OK
    );
    let csv = fs::read_to_string(dir.path().join("out/gamma_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "gamma,v1,v2,sum");
    assert_eq!(lines.len(), 4, "3 gamma rows expected: {csv}");
    assert!(lines[1].starts_with("0,"));
    assert!(lines[3].starts_with("1,"));
}

#[test]
fn unsweep_and_sweep_are_complements() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), 40);
    let scene = scene.to_str().unwrap();
    assert_eq!(cogen(&["unsweep", "--scene", scene]), EXIT_OK);
    assert_eq!(cogen(&["sweep", "--scene", scene]), EXIT_OK);
    let kept = cogen_core::export::read_field_raw(&dir.path().join("out/unsweep_body2.bin")).unwrap();
    let hit = cogen_core::export::read_field_raw(&dir.path().join("out/sweep_body2.bin")).unwrap();
    for (a, b) in kept.values().iter().zip(hit.values()) {
        assert_eq!(a + b, 1.0);
    }
    // the other direction works too
    assert_eq!(cogen(&["unsweep", "--scene", scene, "--body", "1"]), EXIT_OK);
    assert!(dir.path().join("out/unsweep_body1.bin").is_file());
}

#[test]
fn metrics_runs_on_saved_fields() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), 120);
    let scene = scene.to_str().unwrap();
    assert_eq!(cogen(&["optimize", "--scene", scene]), EXIT_OK);
    let rho1 = dir.path().join("out/rho1.bin");
    let rho2 = dir.path().join("out/rho2.bin");
    assert_eq!(
        cogen(&[
            "metrics",
            "--scene",
            scene,
            "--rho1",
            rho1.to_str().unwrap(),
            "--rho2",
            rho2.to_str().unwrap(),
        ]),
        EXIT_OK
    );
    let csv = fs::read_to_string(dir.path().join("out/distance.csv")).unwrap();
    assert!(csv.starts_with("k,t_k,distance\n"));
    assert_eq!(csv.lines().count(), 17); // header + 16 timesteps
}

#[test]
fn oracle_check_passes_then_fails_on_absurd_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), 40);
    let scene = scene.to_str().unwrap();
    assert_eq!(cogen(&["oracle-check", "--scene", scene]), EXIT_OK);
    assert_eq!(
        cogen(&["oracle-check", "--scene", scene, "--tol", "1e-12"]),
        EXIT_ORACLE_MISMATCH
    );
}

#[test]
fn export_converts_between_formats() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path(), 40);
    let scene = scene.to_str().unwrap();
    assert_eq!(cogen(&["unsweep", "--scene", scene]), EXIT_OK);
    let input = dir.path().join("out/unsweep_body2.bin");
    let input = input.to_str().unwrap();

    let pgm = dir.path().join("u.pgm");
    assert_eq!(
        cogen(&["export", "--input", input, "--format", "pgm", "--output", pgm.to_str().unwrap()]),
        EXIT_OK
    );
    let bytes = fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n"));

    let raw = dir.path().join("u2.bin");
    assert_eq!(
        cogen(&["export", "--input", input, "--format", "raw", "--output", raw.to_str().unwrap()]),
        EXIT_OK
    );
    assert_eq!(fs::read(&raw).unwrap(), fs::read(input).unwrap());

    // vtk rejects 2D fields
    let vtk = dir.path().join("u.vtk");
    assert_eq!(
        cogen(&["export", "--input", input, "--format", "vtk", "--output", vtk.to_str().unwrap()]),
        EXIT_VALIDATION
    );
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{ \"dimension\": 2 }").unwrap();
    assert_eq!(cogen(&["optimize", "--scene", path.to_str().unwrap()]), EXIT_VALIDATION);

    let scene = write_scene(dir.path(), 40);
    let scene = scene.to_str().unwrap();
    assert_eq!(
        cogen(&["optimize", "--scene", scene, "--gamma", "1.5"]),
        EXIT_VALIDATION
    );
    assert_eq!(cogen(&["unsweep", "--scene", scene, "--body", "3"]), EXIT_VALIDATION);
    assert_eq!(
        cogen(&["gamma-sweep", "--scene", scene, "--gammas", "nonsense"]),
        EXIT_VALIDATION
    );
}

#[test]
fn shipped_scenes_parse() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenes");
    for name in ["squares2d", "cam2d", "cam3d", "bolt3d"] {
        for sub in ["", "desk/"] {
            let path = format!("{root}/{sub}{name}.json");
            let scene = cogen_core::scene::SceneConfig::from_file(Path::new(&path))
                .unwrap_or_else(|e| panic!("{path}: {e}"));
            match name {
                "squares2d" => {
                    if sub.is_empty() {
                        assert_eq!(scene.grid1.dims()[0], 400);
                        assert_eq!(scene.timesteps, 500);
                    }
                }
                "bolt3d" if sub.is_empty() => {
                    assert_eq!(scene.timesteps, 5000);
                }
                _ => {}
            }
        }
    }
}
