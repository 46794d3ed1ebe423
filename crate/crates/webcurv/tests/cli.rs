//! End-to-end tests of the `webcurv` binary: exit codes, report shape and
//! determinism.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_webcurv"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const EXP_XY: &str = r#"{
    "kind": "explicit", "n": 1,
    "exprs": {"A[1][1]": "exp(x1*y1)"},
    "probe": {"window": [[-0.5, 0.5], [-0.5, 0.5]], "points": [[0.0, 0.0], [0.1, -0.2]]}
}"#;

const SPHERE: &str = r#"{
    "kind": "ray_space", "n": 3,
    "params": {"cx": 0.1, "cy": 0.2, "cz": 0.3, "r": 1.0},
    "exprs": {
        "f": "cz + sqrt(r^2 - (s1-cx)^2 - (s2-cy)^2)",
        "g": "cz - sqrt(r^2 - (s1-cx)^2 - (s2-cy)^2)"
    },
    "probe": {"window": [[-0.2, 0.2], [-0.2, 0.2], [-0.2, 0.2], [-0.2, 0.2]],
              "points": [[0.0, 0.0, 0.0, 0.0]]}
}"#;

#[test]
fn analyze_sphere_reports_flat_ricci() {
    let dir = TempDir::new().unwrap();
    let model = write(dir.path(), "sphere.json", SPHERE);
    let out = bin().args(["analyze", "--model"]).arg(&model).output().unwrap();
    let v = stdout_json(&out);
    let ricci = &v["points"][0]["ricci"];
    for row in ricci.as_array().unwrap() {
        for entry in row.as_array().unwrap() {
            assert!(entry.as_f64().unwrap().abs() < 1e-7, "ricci {entry}");
        }
    }
    // every report embeds the calibration constants
    assert_eq!(v["calibration"]["loop_coeff_per_kappa"], 1.0);
    assert_eq!(v["calibration"]["sphere_omega_f_sign"], -1.0);
}

#[test]
fn analyze_grid_is_deterministic_modulo_wall_time() {
    let dir = TempDir::new().unwrap();
    let model = write(dir.path(), "exp.json", EXP_XY);
    let run = |jobs: &str| -> Value {
        let out = bin()
            .args(["analyze", "--grid", "3", "--jobs", jobs, "--model"])
            .arg(&model)
            .output()
            .unwrap();
        let mut v = stdout_json(&out);
        v.as_object_mut().unwrap().remove("wall_time_ms");
        v
    };
    let a = run("1");
    let b = run("4");
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap(),
        "reports differ across thread counts"
    );
}

#[test]
fn schema_error_exits_1() {
    let dir = TempDir::new().unwrap();
    let model = write(
        dir.path(),
        "bad.json",
        r#"{"kind": "explicit", "n": 1, "exprs": {}}"#,
    );
    let out = bin().args(["analyze", "--model"]).arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing expression"));
}

#[test]
fn unparseable_json_exits_1() {
    let dir = TempDir::new().unwrap();
    let model = write(dir.path(), "garbage.json", "not json");
    let out = bin().args(["analyze", "--model"]).arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn inflection_probe_exits_2_and_names_the_condition() {
    let dir = TempDir::new().unwrap();
    let model = write(
        dir.path(),
        "tangent.json",
        r#"{"kind": "tangent_lines", "n": 1,
            "exprs": {"f": "s^3", "g": "2 - t^2"},
            "probe": {"points": [[0.0, 1.0]]}}"#,
    );
    let out = bin().args(["analyze", "--model"]).arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("inflection"));
}

#[test]
fn verify_product_suite_passes() {
    let out = bin()
        .args(["verify", "--suite", "product", "--trials", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("criterion  3") && text.contains("PASS"), "{text}");
}

#[test]
fn verify_unknown_suite_exits_1() {
    let out = bin().args(["verify", "--suite", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_failure_exits_3() {
    // out-of-range n makes the cjk criterion fail and must surface as a
    // verification failure
    let out = bin()
        .args(["verify", "--suite", "cjk", "--n", "9"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_report_is_seed_deterministic() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| -> Value {
        let path = dir.path().join(name);
        let out = bin()
            .args([
                "verify",
                "--suite",
                "cjk",
                "--n",
                "3",
                "--trials",
                "2",
                "--seed",
                "7",
                "--out",
            ])
            .arg(&path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let mut v: Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("wall_time_ms");
        v
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn holonomy_exp_xy_matches_taylor_law() {
    let dir = TempDir::new().unwrap();
    let model = write(dir.path(), "exp.json", EXP_XY);
    let out = bin().args(["holonomy", "--model"]).arg(&model).output().unwrap();
    let v = stdout_json(&out);
    let factor = v["taylor_factor"].as_f64().unwrap();
    assert!((factor - 2.0).abs() / 2.0 < 0.02, "taylor factor {factor}");
    assert!(v["fit"]["c_u"].as_f64().unwrap() > 0.0);
    assert!(v["fit"]["c_v"].as_f64().unwrap() < 0.0);
}

#[test]
fn holonomy_needs_a_planar_model() {
    let dir = TempDir::new().unwrap();
    let model = write(dir.path(), "sphere.json", SPHERE);
    let out = bin().args(["holonomy", "--model"]).arg(&model).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
