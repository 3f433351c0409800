use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anisogauge")).args(args).env_remove("ANISOGAUGE_THREADS").output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn verify(config: &str, out: &Path) -> Output {
    run(&["verify", "--config", config, "--out-dir", out.to_str().unwrap()])
}

const BALL_MR: &str = r#"{
    "gauges": [{"family": "euclidean", "n": 2}],
    "domains": [{"variant": "ball", "center": [0, 0], "radius": 1}],
    "grid": {"h": 0.03125},
    "exponents": [{"p": 2, "alpha": "auto"}],
    "family": {"count": 4, "seed": 9},
    "checks": ["mr_bound"],
    "constants": {"mc_samples": 20000},
    "output": {"csv": "mr.csv", "json": "mr.json"}
}"#;

#[test]
fn mr_bound_on_the_ball_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mr.json", BALL_MR);
    let out = verify(&cfg, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("mr.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.starts_with("mr_bound,") && r.ends_with(",pass")), "{csv}");
}

#[test]
fn reruns_are_byte_identical_outside_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        &BALL_MR.replace(r#"["mr_bound"]"#, r#"["mr_bound", "weighted_sobolev", "hardy_sobolev"]"#),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(verify(&cfg, &a).status.code(), Some(0));
    assert_eq!(
        run(&["verify", "--config", &cfg, "--out-dir", b.to_str().unwrap(), "--threads", "3"]).status.code(),
        Some(0)
    );
    assert_eq!(std::fs::read(a.join("mr.csv")).unwrap(), std::fs::read(b.join("mr.csv")).unwrap());
    let strip = |p: &Path| {
        let mut v: Value = serde_json::from_slice(&std::fs::read(p.join("mr.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn annulus_probe_is_an_expected_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ann.json",
        r#"{
        "gauges": [{"family": "euclidean", "n": 2}],
        "domains": [{"variant": "annulus", "center": [0, 0], "r_in": 1, "r_out": 2}],
        "grid": {"h": 0.015625},
        "exponents": [{"p": 1.5, "alpha": "auto"}],
        "family": {"count": 4, "seed": 1},
        "checks": ["positivity"],
        "constants": {"mc_samples": 20000}
    }"#,
    );
    let out = verify(&cfg, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",expected_violation"), "{csv}");

    let out = run(&["probe", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("positivity")).unwrap();
    let value: f64 = line.split("value=").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(value < -0.1, "{line}");
    assert!(line.contains("witness=probe#"));
}

#[test]
fn fail_rows_exit_one_with_a_stderr_line_each() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tight.json", &BALL_MR.replace(r#""checks""#, r#""slack": {"relative": -0.999}, "checks""#));
    let out = verify(&cfg, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("mr.csv")).unwrap();
    let fails = csv.lines().filter(|l| l.ends_with(",fail")).count();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(fails > 0);
    assert_eq!(stderr.lines().filter(|l| l.starts_with("FAIL mr_bound")).count(), fails);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_exponent = write_config(dir.path(), "p.json", &BALL_MR.replace(r#""alpha": "auto""#, r#""alpha": 0"#));
    let out = verify(&bad_exponent, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exponents[0]"));

    let broken = write_config(dir.path(), "b.json", "{\n  \"gauges\": [\n");
    let out = verify(&broken, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    assert_eq!(verify("/nonexistent/cfg.json", dir.path()).status.code(), Some(2));
    assert_eq!(run(&["frobnicate", "--config", &broken]).status.code(), Some(2));
}

#[test]
fn constants_report_the_euclidean_sobolev_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", BALL_MR);
    let out = run(&["constants", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let s: f64 = text.split("S_nF = ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!((s / 3.54491 - 1.0).abs() < 5e-3, "{text}");
}

#[test]
fn half_space_distance_dump_is_linear() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "hs.json",
        &BALL_MR.replace(
            r#"{"variant": "ball", "center": [0, 0], "radius": 1}"#,
            r#"{"variant": "half_space", "n": 2, "axis": 1, "offset": 0.25}"#,
        ),
    );
    let out = run(&["distance-field", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let head: Value = serde_json::from_slice(&std::fs::read(dir.path().join("fields/dF_0_0.json")).unwrap()).unwrap();
    let bytes = std::fs::read(dir.path().join("fields/dF_0_0.bin")).unwrap();
    let values: Vec<f64> = bytes.chunks(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let h = head["grid"]["h"].as_f64().unwrap();
    let oy = head["grid"]["origin"][1].as_f64().unwrap();
    let ny = head["grid"]["dims"][1].as_u64().unwrap() as usize;
    assert_eq!(values.len() % ny, 0);
    assert!(values.iter().filter(|&&v| v > 0.0).count() > values.len() / 4);
    for (k, v) in values.iter().enumerate() {
        let y = oy + ((k % ny) as f64 + 0.5) * h;
        let want = if y > 0.25 { y - 0.25 } else { 0.0 };
        assert!((v - want).abs() < 1e-12, "cell {k}: {v} vs {want}");
    }
}
