use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bottleneck-lab"));
    c.env_remove("BOTTLENECK_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn manifest(path: &Path) -> Value {
    let mut p = path.as_os_str().to_owned();
    p.push(".manifest.json");
    serde_json::from_str(&fs::read_to_string(PathBuf::from(p)).unwrap()).unwrap()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn k2(p: f64) -> f64 {
    (p * p + (1.0 - p) * (1.0 - p)).sqrt()
}

#[test]
fn eb_curve_both_directions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eb.csv");
    let o = run(&[
        "curve", "--bsc", "0.1,0.1", "--problem", "eb", "--direction", "both", "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(
        header,
        ["problem", "direction", "lambda", "x", "y", "trivial", "witness_json"]
    );
    assert!(rows.iter().any(|r| r[0] == "eb" && r[1] == "upper"));
    assert!(rows.iter().any(|r| r[0] == "epf" && r[1] == "lower"));
    for r in &rows {
        let w: Value = serde_json::from_str(&r[6]).unwrap();
        assert!(w["atoms"].as_array().is_some_and(|a| !a.is_empty()));
    }
    // A binary χ² boundary is one segment from the origin to (1, χ²(X;Y)).
    let snapped = 410.0 / 4096.0;
    let s = snapped * 0.9 + (1.0 - snapped) * 0.1;
    let chi = 0.64 * snapped * (1.0 - snapped) / (s * (1.0 - s));
    let last_upper = rows.iter().rfind(|r| r[1] == "upper").unwrap();
    assert!((num(&last_upper[3]) - 1.0).abs() < 1e-12);
    assert!((num(&last_upper[4]) - chi).abs() < 1e-9);

    let m = manifest(&out);
    assert_eq!(m["command"], "curve");
    assert_eq!(m["seed"], 0);
    assert_eq!(m["input_digest"].as_str().unwrap().len(), 64);
    assert_eq!(m["parameters"]["problem"], "eb");
    assert_eq!(m["parameters"]["bsc"], "0.1,0.1");
    assert_eq!(m["parameters"]["resolution"], 4096);
    assert!(m["tool_version"].is_string());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = bin()
            .env("BOTTLENECK_LAB_THREADS", threads)
            .args([
                "curve", "--bsc", "0.2,0.15", "--problem", "ib", "--frame", "entropy",
                "--direction", "both", "--lambda-steps", "64", "--output",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(manifest(&a), manifest(&b));
}

#[test]
fn arimoto_curve_in_both_frames() {
    let dir = tempfile::tempdir().unwrap();
    for frame in ["K", "entropy"] {
        let out = dir.path().join(format!("{frame}.csv"));
        let o = run(&[
            "curve", "--bsc", "0.4,0.2", "--problem", "arimoto", "--beta", "2", "--direction",
            "both", "--frame", frame, "--output", out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let (_, rows) = read_csv(&out);
        assert!(rows.iter().all(|r| r[0] == "arimoto(2)"));
        assert!(rows.iter().any(|r| r[1] == "lower") && rows.iter().any(|r| r[1] == "upper"));
        if frame == "K" {
            // K-frame x runs over [K(q), 1].
            let xs: Vec<f64> = rows.iter().map(|r| num(&r[3])).collect();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(0.0, f64::max);
            assert!((lo - k2(2458.0 / 4096.0)).abs() < 1e-12);
            assert!((hi - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn independent_joint_gives_flat_curves() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("product.json");
    // P_XY = q ⊗ r with q = (0.3, 0.7), r = (0.25, 0.75).
    fs::write(
        &input,
        r#"{"p_xy": [[0.075, 0.225], [0.175, 0.525]]}"#,
    )
    .unwrap();
    let out = dir.path().join("flat.csv");
    let o = run(&[
        "curve", "--input", input.to_str().unwrap(), "--problem", "ib", "--direction", "both",
        "--lambda-steps", "32", "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&out);
    assert!(rows.iter().any(|r| num(&r[3]) > 0.1));
    for r in &rows {
        assert!(num(&r[4]).abs() < 1e-12, "y = {}", r[4]);
    }
}

#[test]
fn invalid_inputs_exit_2_and_leave_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = out.to_str().unwrap();
    let missing = dir.path().join("missing.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["curve", "--bsc", "1.5,0.1", "--problem", "ib", "--output", o],
        vec!["curve", "--bsc", "0.1,0.1", "--problem", "eb", "--frame", "entropy", "--output", o],
        vec!["curve", "--bsc", "0.1,0.1", "--problem", "arimoto", "--output", o],
        vec!["curve", "--input", missing.to_str().unwrap(), "--problem", "ib", "--output", o],
        vec!["curve", "--bsc", "0.1,0.1", "--problem", "nope", "--output", o],
        vec!["closed-form", "--bsc", "0.4,0.2", "--law", "arimoto-mgl", "--beta", "1.5", "--output", o],
        vec!["closed-form", "--bsc", "0.4,0.2", "--law", "arimoto-mrgl", "--output", o],
        vec!["closed-form", "--bsc", "0.7,0.2", "--law", "mgl", "--output", o],
    ];
    for args in cases {
        let r = run(&args);
        assert_eq!(code(&r), 2, "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

    let r = bin()
        .env("BOTTLENECK_LAB_THREADS", "0")
        .args(["verify", "--suite", "mgl"])
        .output()
        .unwrap();
    assert_eq!(code(&r), 2);
}

#[test]
fn infeasible_configurations_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let ternary = dir.path().join("ternary.json");
    fs::write(
        &ternary,
        r#"{"q": [0.5, 0.3, 0.2], "T": [[0.8, 0.1, 0.2], [0.2, 0.9, 0.8]]}"#,
    )
    .unwrap();
    let five = dir.path().join("five.json");
    fs::write(
        &five,
        r#"{"p_xy": [[0.1, 0.1], [0.1, 0.1], [0.1, 0.1], [0.1, 0.1], [0.1, 0.1]]}"#,
    )
    .unwrap();
    let out = dir.path().join("never.csv");
    let o = out.to_str().unwrap();
    let cases = [
        vec!["curve", "--input", ternary.to_str().unwrap(), "--problem", "arimoto", "--beta", "2", "--output", o],
        vec!["curve", "--input", five.to_str().unwrap(), "--problem", "ib", "--output", o],
    ];
    for args in cases {
        let r = run(&args);
        assert_eq!(code(&r), 3, "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
    }
    assert!(!out.exists());
}

#[test]
fn mgl_table_starts_at_crossover_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mgl.csv");
    let o = run(&[
        "closed-form", "--law", "mgl", "--bsc", "0.1,0.1", "--points", "101", "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["q", "delta", "beta", "x", "lower", "upper"]);
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[0][2], "");
    assert_eq!(num(&rows[0][3]), 0.0);
    // h_b(0.1) in bits.
    let h = -(0.1f64 * 0.1f64.log2() + 0.9 * 0.9f64.log2());
    assert!((num(&rows[0][4]) - h).abs() < 1e-12);
    assert_eq!(manifest(&out)["parameters"]["law"], "mgl");
}

#[test]
fn mrgl_table_dominates_mgl_table() {
    let dir = tempfile::tempdir().unwrap();
    let lo = dir.path().join("lo.csv");
    let up = dir.path().join("up.csv");
    for (law, out) in [("mgl", &lo), ("mrgl", &up)] {
        let o = run(&["closed-form", "--law", law, "--bsc", "0.1,0.1", "--output", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    let (_, lo) = read_csv(&lo);
    let (_, up) = read_csv(&up);
    assert_eq!(lo.len(), up.len());
    for (a, b) in lo.iter().zip(&up) {
        assert_eq!(a[3], b[3]);
        assert!(num(&b[5]) >= num(&a[4]) - 1e-12, "x = {}", a[3]);
    }
}

#[test]
fn arimoto_mgl_table_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("amgl.csv");
    let o = run(&[
        "closed-form", "--law", "arimoto-mgl", "--beta", "2", "--bsc", "0.4,0.2", "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = read_csv(&out);
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (num(&r[3]), num(&r[4]))).collect();
    let has = |x: f64, y: f64| pts.iter().any(|&(a, b)| (a - x).abs() < 1e-12 && (b - y).abs() < 1e-12);
    assert!(has(k2(0.4), k2(0.4 * 0.8 + 0.6 * 0.2)));
    assert!(has(1.0, k2(0.2)));
}

#[test]
fn verify_reports_and_exit_codes() {
    let o = run(&["verify", "--suite", "mgl"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[PASS]") && text.contains("suite mgl: PASS"));

    let checks = |seed: &str| {
        let o = run(&["verify", "--suite", "oracle-cross", "--seed", seed]);
        assert_eq!(code(&o), 0);
        String::from_utf8(o.stdout)
            .unwrap()
            .lines()
            .filter(|l| l.starts_with('['))
            .map(String::from)
            .collect::<Vec<_>>()
    };
    assert_eq!(checks("7"), checks("7"));
}
