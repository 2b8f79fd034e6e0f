use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sdtdg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdtdg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn check_svg(path: &Path, paths: usize) {
    let svg = fs::read_to_string(path).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<path").count(), paths, "{}", path.display());
}

#[test]
fn help_documents_exit_codes() {
    let out = sdtdg(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for needle in [
        "0  success",
        "2  invalid",
        "3  numerical",
        "4  external",
        "SDTDG_THREADS",
    ] {
        assert!(text.contains(needle), "missing '{needle}'");
    }
}

#[test]
fn configuration_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let cases: [&[&str]; 5] = [
        &["classify", "--nu", "1.5", "--xa", "5,0", "--out", out_dir],
        &["classify", "--out", out_dir],
        &["simulate", "--xa", "5,0", "--dt", "-1", "--out", out_dir],
        &["simulate", "--xa", "5,0", "--defender", "sideways", "--out", out_dir],
        &["oval", "--scenario", "/nonexistent/scenario.json"],
    ];
    for args in cases {
        let out = sdtdg(args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = Command::new(env!("CARGO_BIN_EXE_sdtdg"))
        .args(["classify", "--xa", "5,0"])
        .env("SDTDG_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oval_outputs() {
    let dir = TempDir::new().unwrap();
    let out = sdtdg(&[
        "oval",
        "--xd",
        "2,0",
        "--xa",
        "4,0",
        "--nu",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    check_svg(&dir.path().join("oval.svg"), 1);
    let csv = fs::read_to_string(dir.path().join("oval.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y"));
    let xs: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    // on-axis extremes of the oval: attacker at 4, defender at 2
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!((min - (4.0 - 3.0 / 0.5)).abs() <= 1e-6, "min {min}");
    assert!((max - (4.0 - 1.0 / 1.5)).abs() <= 1e-6, "max {max}");
    let summary = read_json(&dir.path().join("oval.json"));
    assert!(summary["phi_bar_max"].as_f64().unwrap() > 0.0);
}

#[test]
fn barrier_outputs_and_terminations() {
    for (xd, termination, labels) in [
        ("4,0", "symmetry-axis", &["natural", "envelope-cw", "envelope-ccw"][..]),
        (
            "3,0",
            "capture-disk",
            &["natural", "envelope-cw", "capture", "envelope-ccw"][..],
        ),
    ] {
        let dir = TempDir::new().unwrap();
        let out = sdtdg(&[
            "barrier",
            "--xd",
            xd,
            "--nu",
            "0.5",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let sidecar = read_json(&dir.path().join("barrier.json"));
        assert_eq!(sidecar["closed"], Value::Bool(true));
        assert_eq!(sidecar["termination"], termination);
        assert!(sidecar["closure_gap"].as_f64().unwrap() <= 1e-5);
        check_svg(&dir.path().join("barrier.svg"), 1);
        let csv = fs::read_to_string(dir.path().join("barrier.csv")).unwrap();
        assert!(csv.starts_with("x,y,segment\n"));
        for label in labels {
            assert!(csv.contains(&format!(",{label}\n")), "{xd}: {label}");
        }
    }
}

#[test]
fn barrier_inside_capture_reach_is_trivial() {
    let dir = TempDir::new().unwrap();
    let out = sdtdg(&["barrier", "--xd", "0.5,0", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["region"], "defender-win");
}

#[test]
fn simulate_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let run = |sub: &str, seed: &str| {
        let out_dir = dir.path().join(sub);
        let out = sdtdg(&[
            "simulate",
            "--xd",
            "4,0",
            "--xa",
            "5.5,1.5",
            "--nu",
            "0.5",
            "--dt",
            "0.002",
            "--seed",
            seed,
            "--with-barrier",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (stdout_json(&out), out_dir)
    };
    let (first, first_dir) = run("a", "1");
    let (second, _) = run("b", "1");
    let (third, _) = run("c", "99");
    assert_eq!(first["trace_sha256"], second["trace_sha256"]);
    // the built-in strategies ignore the seed
    assert_eq!(first["trace_sha256"], third["trace_sha256"]);
    assert!(["defender-win", "attacker-win"].contains(&first["outcome"].as_str().unwrap()));

    let csv = fs::read_to_string(first_dir.join("trace.csv")).unwrap();
    assert!(csv.starts_with("t,xD_x,xD_y,xA_x,xA_y,phase,R,rhoD,rhoA\n"));
    assert!(csv.lines().last().unwrap().starts_with("outcome,"));
    check_svg(&first_dir.join("trace.svg"), 3);

    // replaying the recorded scenario reproduces the trace
    let replay_dir = dir.path().join("replay");
    let out = sdtdg(&[
        "simulate",
        "--scenario",
        first_dir.join("scenario.json").to_str().unwrap(),
        "--out",
        replay_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["trace_sha256"], first["trace_sha256"]);
    assert_eq!(read_json(&replay_dir.join("scenario.json"))["seed"], 1);
}

#[cfg(unix)]
fn script(dir: &Path, name: &str, body: &str) -> String {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    format!("external:{}", path.display())
}

#[cfg(unix)]
#[test]
fn external_attacker_plugin() {
    let dir = TempDir::new().unwrap();
    let west = script(dir.path(), "west.sh", "while read line; do echo \"-1 0\"; done");
    let out = sdtdg(&[
        "simulate",
        "--xd",
        "0,5",
        "--xa",
        "10,0",
        "--nu",
        "0.5",
        "--dt",
        "0.01",
        "--attacker",
        &west,
        "--out",
        dir.path().join("ok").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["outcome"], "defender-win");
}

#[cfg(unix)]
#[test]
fn plugin_failures_exit_4() {
    let dir = TempDir::new().unwrap();
    let bad = script(
        dir.path(),
        "bad.sh",
        "read line; echo \"-1 0\"; read line; echo \"2 0\"",
    );
    let quiet = script(dir.path(), "quiet.sh", "exit 0");
    let missing = format!("external:{}", dir.path().join("missing.sh").display());
    for (name, plugin) in [("bad", &bad), ("quiet", &quiet), ("missing", &missing)] {
        let out_dir = dir.path().join(name);
        let out = sdtdg(&[
            "simulate",
            "--xa",
            "10,0",
            "--attacker",
            plugin,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(4),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        if name == "bad" {
            let partial = fs::read_to_string(out_dir.join("trace.partial.csv")).unwrap();
            // header, the start and the one accepted step
            assert_eq!(partial.lines().count(), 3);
        }
    }
}

#[test]
fn phase2_field_outputs() {
    let dir = TempDir::new().unwrap();
    let out = sdtdg(&[
        "phase2-field",
        "--nu",
        "0.5",
        "--n-rho",
        "6",
        "--n-theta",
        "6",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("phase2_field.csv")).unwrap();
    assert!(csv.starts_with("rho_d,theta,value\n"));
    assert_eq!(csv.lines().count(), 37);
    assert!(
        fs::read_to_string(dir.path().join("separatrix.csv"))
            .unwrap()
            .lines()
            .count()
            > 10
    );
    assert_eq!(read_json(&dir.path().join("phase2_field.json"))["failed"], 0);
}

#[test]
fn classify_reports_region() {
    let far = sdtdg(&["classify", "--xd", "4,0", "--xa", "-9,0", "--nu", "0.5"]);
    assert!(far.status.success());
    let v = stdout_json(&far);
    assert_eq!(v["region"], "defender-win");
    assert_eq!(v["reason"], "natural-barrier");

    let near = sdtdg(&["classify", "--xd", "4,0", "--xa", "0,2", "--nu", "0.5"]);
    assert!(near.status.success());
    assert_eq!(stdout_json(&near)["region"], "attacker-win");
}
