use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sphaera(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphaera"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = sphaera(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn dir_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth", "--seed", "7", "--spectrum", "power:A=1,gamma=3", "--L", "16", "--out", dir_arg(d)]);
    }
    for name in ["coefficients.csv", "map.csv"] {
        let (x, y) = (fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        assert_eq!(x, y, "{name}");
    }
    let header = fs::read_to_string(a.join("map.csv")).unwrap();
    let mut lines = header.lines();
    assert_eq!(lines.next(), Some("# sphaera-map L=16 ntheta=17 nphi=33"));
    assert!(lines.next().unwrap().contains("command=synth seed=7 L=16 spectrum=power:A=1,gamma=3"));
    assert_eq!(data_rows(&a.join("map.csv")).len(), 1 + 17 * 33);
}

#[test]
fn evolve_at_zero_time_is_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "--seed", "3", "--L", "12", "--out", dir_arg(d)]);
    let input = d.join("coefficients.csv");
    let evolved = d.join("evolved");
    ok(&["evolve", "--input", dir_arg(&input), "--t", "0", "--psi", "gamma", "--out", dir_arg(&evolved)]);
    assert_eq!(data_rows(&input), data_rows(&evolved.join("evolved_coefficients.csv")));

    ok(&["evolve", "--input", dir_arg(&input), "--t", "1", "--out", dir_arg(&evolved)]);
    assert_ne!(data_rows(&input), data_rows(&evolved.join("evolved_coefficients.csv")));
    let spectrum = fs::read_to_string(evolved.join("effective_spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("# sphaera-spectrum L=12 family=tabulated"));
}

#[test]
fn cov_check_reproduces_space_time_covariance() {
    let out = ok(&["cov-check", "--psi", "stable:alpha=0.5", "--t1", "0.5", "--t2", "0.5", "--N", "20000", "--L", "8"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["oracle", "estimate", "se", "z_score", "pass"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert!(report["z_score"].as_f64().unwrap().abs() <= 4.0);
    assert_eq!(report["pass"], Value::Bool(true));

    let out = ok(&["cov-check", "--mode", "time", "--t1", "0", "--t2", "1", "--N", "20000", "--L", "8", "--seed", "4"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["z_score"].as_f64().unwrap().abs() <= 4.0);
}

#[test]
fn cov_emits_series_value() {
    let out = ok(&["cov", "--L", "8", "--t1", "1e9", "--t2", "1e9", "--cos-angle", "0.2"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let gamma = v["gamma"].as_f64().unwrap();
    assert!((gamma - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
    assert_eq!(v["cos_angle"].as_f64(), Some(0.2));
}

#[test]
fn validation_failures_exit_with_two() {
    for args in [
        vec!["cov", "--psi", "stable:alpha=1.5"],
        vec!["cov", "--psi", "stable:alpha=0.5,beta=1"],
        vec!["synth", "--spectrum", "power:A=1,gamma=2"],
        vec!["cov-check", "--N", "50"],
        vec!["cov-check", "--mode", "time", "--t1", "2", "--t2", "1"],
        vec!["cov-check", "--cos-angle", "1"],
        vec!["walk", "--t", "-1"],
        vec!["synth", "--L"],
    ] {
        assert_eq!(sphaera(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn spectrum_estimates_average_to_input() {
    let tmp = tempfile::tempdir().unwrap();
    let seeds = 100;
    let bandlimit = 8;
    let mut sums = vec![0.0; bandlimit + 1];
    for seed in 0..seeds {
        let d = tmp.path().join(seed.to_string());
        ok(&["synth", "--seed", &seed.to_string(), "--L", "8", "--out", dir_arg(&d)]);
        ok(&["spectrum", "--input", dir_arg(&d.join("coefficients.csv")), "--out", dir_arg(&d)]);
        for row in data_rows(&d.join("spectrum.csv")).iter().skip(1) {
            let (l, v) = row.split_once(',').unwrap();
            sums[l.parse::<usize>().unwrap()] += v.parse::<f64>().unwrap();
        }
    }
    for (l, sum) in sums.iter().enumerate().skip(1) {
        let cl = (1.0 + l as f64).powi(-3);
        let bound = 4.0 * cl * (2.0 / (2 * l + 1) as f64).sqrt() / (seeds as f64).sqrt();
        assert!((sum / seeds as f64 - cl).abs() <= bound, "l = {l}");
    }
}

#[test]
fn walk_and_kernel_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["walk", "--t", "2", "--steps", "20", "--psi", "gamma", "--seed", "1", "--out", dir_arg(d)]);
    let rows = data_rows(&d.join("walk.csv"));
    assert_eq!(rows[0], "t,theta,phi");
    assert_eq!(rows.len(), 22);
    let times: Vec<f64> = rows[1..].iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]));

    ok(&["kernel", "--psi", "gamma", "--L", "16", "--points", "11", "--out", dir_arg(d)]);
    let rows = data_rows(&d.join("kernel.csv"));
    assert_eq!(rows.len(), 12);
    let header = fs::read_to_string(d.join("kernel.csv")).unwrap();
    assert!(header.starts_with("# sphaera-kernel L=16 l_min=0"));
    ok(&["kernel", "--psi", "stable:alpha=0.5", "--points", "3", "--out", dir_arg(d)]);
    assert!(fs::read_to_string(d.join("kernel.csv")).unwrap().contains("l_min=1"));
}

#[test]
fn subordinator_check_passes() {
    let out = ok(&["subord-test", "--psi", "geostable:alpha=0.7", "--t", "2", "--N", "50000", "--seed", "5"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_all_is_deterministic_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let d = tmp.path().join(name);
        let out = sphaera(&["verify-all", "--seed", "11", "--threads", threads, "--out", dir_arg(&d)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        fs::read(d.join("report.json")).unwrap()
    };
    let first = run("8", "a");
    let second = run("8", "b");
    assert_eq!(first, second);
    let single = run("1", "c");
    let verdicts = |bytes: &[u8]| -> Vec<bool> {
        let v: Value = serde_json::from_slice(bytes).unwrap();
        v["report"]["criteria"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["pass"].as_bool().unwrap())
            .collect()
    };
    assert_eq!(verdicts(&first), verdicts(&single));
    assert_eq!(verdicts(&first).len(), 10);
}
