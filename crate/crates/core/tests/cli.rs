use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn kw(args: &[&str]) -> Run {
    let Output {
        status,
        stdout,
        stderr,
    } = Command::new(env!("CARGO_BIN_EXE_kw"))
        .args(args)
        .output()
        .unwrap();
    Run {
        code: status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

fn config(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const GOLDEN: &str = r#"{
    "grid": {"points": [16, 16], "periods": [1.0, 1.0]},
    "problem": {"S": -1, "A": 1, "B": 1, "alpha": 1, "beta": 1},
    "solver": {"method": "METHOD", "tol": 1e-12, "residual_tol": 1e-11}
}"#;

const MMS: &str = r#"{
    "grid": {"points": [16, 16], "periods": [1.0, 1.0]},
    "problem": {"A": "2 + cos(2*pi*x)", "B": "1 + 0.5*sin(2*pi*y)", "theta": [0.3, -0.2], "alpha": 1.5, "beta": 0.7},
    "exact": "EXACT",
    "solver": {"method": "newton", "tol": 1e-11}
}"#;

fn solution_values(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.parse().unwrap())
        .collect()
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ok = config(&dir, "ok.json", &GOLDEN.replace("METHOD", "newton"));
    let r = kw(&["validate", "--config", s(&ok)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["passed"], true);

    let zero_a = config(
        &dir,
        "a.json",
        &GOLDEN
            .replace("\"A\": 1", "\"A\": 0")
            .replace("METHOD", "newton"),
    );
    let r = kw(&["validate", "--config", s(&zero_a)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("A identically zero"));

    let bad = config(
        &dir,
        "bad.json",
        &GOLDEN
            .replace("\"S\": -1", "\"S\": \"-1 +* x\"")
            .replace("METHOD", "newton"),
    );
    assert_eq!(kw(&["validate", "--config", s(&bad)]).code, 2);
    assert_eq!(
        kw(&["validate", "--config", "/nonexistent/kw.json"]).code,
        2
    );
    assert_eq!(kw(&["validate"]).code, 2);
}

#[test]
fn solve_each_method_and_determinism() {
    let dir = TempDir::new().unwrap();
    let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    for method in ["flow", "newton", "monotone"] {
        let cfg = config(
            &dir,
            &format!("{method}.json"),
            &GOLDEN.replace("METHOD", method),
        );
        let out = dir.path().join(method);
        let r = kw(&["solve", "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(r.code, 0, "{method}: {}", r.stderr);
        let values = solution_values(&out.join("solution.txt"));
        assert_eq!(values.len(), 256);
        assert!(values.iter().all(|v| (v - golden).abs() < 1e-9), "{method}");
        assert!(out.join("report.json").exists());
        assert_eq!(out.join("trace.csv").exists(), method == "flow");
    }

    let cfg = dir.path().join("flow.json");
    let again = dir.path().join("again");
    assert_eq!(
        kw(&["solve", "--config", s(&cfg), "--out", s(&again)]).code,
        0
    );
    let first = std::fs::read(dir.path().join("flow/solution.txt")).unwrap();
    assert_eq!(first, std::fs::read(again.join("solution.txt")).unwrap());
}

#[test]
fn short_flow_exits_with_partial_trace() {
    let dir = TempDir::new().unwrap();
    let json = GOLDEN.replace("METHOD", "flow").replace(
        "\"residual_tol\": 1e-11",
        "\"residual_tol\": 1e-11, \"max_time\": 0.2",
    );
    let cfg = config(&dir, "short.json", &json);
    let out = dir.path().join("out");
    let r = kw(&["solve", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.code, 3);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,sup_ut,energy,min_u,max_u\n"));
    assert!(trace.lines().count() >= 2);
}

#[test]
fn mms_refinement_study() {
    let dir = TempDir::new().unwrap();
    let smooth = config(
        &dir,
        "smooth.json",
        &MMS.replace("EXACT", "0.5*sin(2*pi*x)*cos(2*pi*y)"),
    );
    let out = dir.path().join("smooth");
    let r = kw(&["mms", "--config", s(&smooth), "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = std::fs::read_to_string(out.join("mms.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        ["16", "32", "64"]
    );
    let order: f64 = rows[2][2].parse().unwrap();
    assert!((order - 2.0).abs() < 0.2);

    let flat = config(&dir, "flat.json", &MMS.replace("EXACT", "-0.25"));
    let r = kw(&[
        "mms",
        "--config",
        s(&flat),
        "--out",
        s(&dir.path().join("flat")),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(
        r.stdout.lines().skip(1).all(|l| l.ends_with(",exact")),
        "{}",
        r.stdout
    );

    let positive = MMS
        .replace("EXACT", "0.1*sin(2*pi*x)")
        .replace("\"1 + 0.5*sin(2*pi*y)\"", "10");
    let positive = config(&dir, "positive.json", &positive);
    let r = kw(&[
        "mms",
        "--config",
        s(&positive),
        "--out",
        s(&dir.path().join("pos")),
    ]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("rescale"), "{}", r.stderr);

    let coarse = MMS.replace("EXACT", "0.5*sin(2*pi*x)*cos(2*pi*y)").replace(
        "\"tol\": 1e-11}",
        "\"tol\": 1e-11}, \"mms\": {\"sizes\": [4, 5]}",
    );
    let coarse = config(&dir, "coarse.json", &coarse);
    assert_eq!(
        kw(&[
            "mms",
            "--config",
            s(&coarse),
            "--out",
            s(&dir.path().join("coarse"))
        ])
        .code,
        4
    );

    let no_exact = config(&dir, "no_exact.json", &GOLDEN.replace("METHOD", "newton"));
    assert_eq!(kw(&["mms", "--config", s(&no_exact)]).code, 2);
}

#[test]
fn bounds_command() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "g.json", &GOLDEN.replace("METHOD", "newton"));
    let out = dir.path().join("out");
    assert_eq!(
        kw(&["solve", "--config", s(&cfg), "--out", s(&out)]).code,
        0
    );
    let solution = out.join("solution.txt");

    let r = kw(&["bounds", "--config", s(&cfg), "--solution", s(&solution)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["l2_bound"].as_f64().unwrap() > 0.0);

    let text = std::fs::read_to_string(&solution).unwrap();
    let corrupted: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            if i < 2 {
                l.to_string()
            } else {
                format!("{:.16e}", l.parse::<f64>().unwrap() - 10.0)
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, corrupted).unwrap();
    assert_eq!(
        kw(&["bounds", "--config", s(&cfg), "--solution", s(&bad)]).code,
        4
    );

    assert_eq!(
        kw(&[
            "bounds",
            "--config",
            s(&cfg),
            "--solution",
            "/nonexistent.txt"
        ])
        .code,
        2
    );
    assert_eq!(kw(&["bounds", "--config", s(&cfg)]).code, 2);
    let other_grid = config(
        &dir,
        "other.json",
        &GOLDEN
            .replace("[16, 16]", "[8, 8]")
            .replace("METHOD", "newton"),
    );
    assert_eq!(
        kw(&[
            "bounds",
            "--config",
            s(&other_grid),
            "--solution",
            s(&solution)
        ])
        .code,
        2
    );

    let weak = GOLDEN
        .replace("\"A\": 1", "\"A\": \"1 + cos(2*pi*x)\"")
        .replace("METHOD", "newton");
    let weak = config(&dir, "weak.json", &weak);
    let weak_out = dir.path().join("weak");
    assert_eq!(
        kw(&["solve", "--config", s(&weak), "--out", s(&weak_out)]).code,
        0
    );
    let r = kw(&[
        "bounds",
        "--config",
        s(&weak),
        "--solution",
        s(&weak_out.join("solution.txt")),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("L² bound skipped"));
}

#[test]
fn cross_validate_command() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "g.json", &GOLDEN.replace("METHOD", "newton"));
    let out = dir.path().join("out");
    let r = kw(&["cross-validate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["cross"]["pairs"].as_array().unwrap().len(), 3);
    assert!(out.join("solution_monotone.txt").exists());

    let strict = GOLDEN
        .replace("METHOD", "newton")
        .replace("\"solver\"", "\"cross_tol\": 1e-30, \"solver\"");
    let strict = config(&dir, "strict.json", &strict);
    let r = kw(&["cross-validate", "--config", s(&strict)]);
    assert_eq!(r.code, 4);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert!(report["cross"]["max_difference"].as_f64().unwrap() > 0.0);
}
