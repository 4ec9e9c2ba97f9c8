use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qmas(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qmas"));
    cmd.args(args).env_remove("QMAS_THREADS");
    if let Some(out) = out {
        cmd.arg("--out").arg(out);
    }
    cmd.output().expect("qmas runs")
}

fn square_diag() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/square_diag.json")
        .to_string_lossy()
        .into_owned()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(text.trim_end().lines().count(), 1, "diagnostic: {text}");
    text
}

#[test]
fn bound_on_square_with_diagonal() {
    let out = qmas(&["bound", "--config", &square_diag()], None);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let get = |k: &str| v[k].as_f64().unwrap();
    assert!((get("delta") - 1.0).abs() < 1e-12);
    assert!((get("c1") - 2.0).abs() < 1e-12);
    assert!((get("c2") - std::f64::consts::SQRT_2).abs() < 1e-12);
    assert!((get("bound") - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert!((get("spectral_bound") - 1.0 / 2f64.sqrt()).abs() < 1e-9);
    assert_eq!(v["config"]["graph"]["edges"].as_array().unwrap().len(), 5);
}

#[test]
fn two_agent_consensus() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmas(
        &["consensus", "--agents", "2", "--seed", "7"],
        Some(dir.path()),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 4 + 4 + 3);
    let last: Vec<&str> = lines
        .last()
        .expect("rows after the header")
        .split(',')
        .collect();
    let z: f64 = last[header.iter().position(|h| *h == "z_norm").unwrap()]
        .parse()
        .unwrap();
    assert!(z <= 2.0);

    let summary: Value =
        serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!((summary["delta"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let config = &summary["config"];
    assert_eq!(config["seed"], 7);
    assert_eq!(config["sim"]["mode"], "consensus_quantized");
    assert_eq!(config["sim"]["step"], 1e-3);
    assert_eq!(config["sim"]["horizon"], 20.0);
    assert_eq!(config["sim"]["x0"]["data"].as_array().unwrap().len(), 4);
    let svg = fs::read_to_string(dir.path().join("trajectory.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("stroke-dasharray"));
}

#[test]
fn same_command_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> PathBuf {
        let path = dir.path().join(name);
        let out = qmas(
            &[
                "formation",
                "--config",
                &square_diag(),
                "--seed",
                "5",
                "--horizon",
                "10",
            ],
            Some(&path),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        path
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["trajectory.csv", "summary.json", "trajectory.svg"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let summary: Value =
        serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["sim"]["horizon"], 10.0);
    assert!(summary["config"]["sim"]["spec"].is_array());
}

#[test]
fn montecarlo_writes_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmas(
        &[
            "montecarlo",
            "--mode",
            "formation",
            "--agents",
            "4",
            "--samples",
            "12",
            "--seed",
            "1",
        ],
        Some(dir.path()),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("envelope.csv")).unwrap();
    assert!(csv.starts_with("t,lower95,upper95,min,max,mean\n"));
    assert_eq!(csv.lines().count(), 1 + 501);
    let summary: Value =
        serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["samples"], 12);
    assert_eq!(summary["config"]["agent_range"], serde_json::json!([4, 4]));
    assert_eq!(summary["config"]["delta_floor"], 0.5);
    assert_eq!(summary["samples"].as_array().unwrap().len(), 12);
    assert!(fs::read_to_string(dir.path().join("envelope.svg"))
        .unwrap()
        .contains("<polygon"));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["consensus", "--bogus"],
        vec!["consensus", "--samples", "3"],
        vec!["consensus", "--mode", "sideways"],
        vec!["consensus", "--agents", "1"],
        vec!["montecarlo", "--mode", "continuous"],
        vec!["formation", "--step", "-1"],
        vec!["bound", "--config", "/nonexistent/config.json"],
    ];
    for args in cases {
        let out = qmas(&args, Some(dir.path()));
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(stderr_line(&out).starts_with("qmas: "), "{args:?}");
    }

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"agents": 3, "colour": "red"}"#).unwrap();
    let out = qmas(
        &["consensus", "--config", bad.to_str().unwrap()],
        Some(dir.path()),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).contains("colour"));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = qmas(&["consensus"], Some(&blocker.join("sub")));
    assert_eq!(out.status.code(), Some(1));
    stderr_line(&out);
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = qmas(
        &[
            "consensus",
            "--mode",
            "continuous",
            "--step",
            "1.5",
            "--horizon",
            "3000",
        ],
        Some(dir.path()),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("non-finite"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qmas"))
        .args(["montecarlo", "--samples", "2", "--out"])
        .arg(dir.path())
        .env("QMAS_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    stderr_line(&out);
}

#[test]
fn help_exits_zero() {
    let out = qmas(&["--help"], None);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("montecarlo"));
}
