//! End-to-end runs of the `geomech` binary.

use std::path::Path;
use std::process::{Command, Output};

use geomech::builtins::central_force;
use geomech::integrate::{simulate, TimeSpan};
use tempfile::TempDir;

fn geomech(dir: &Path, args: &[&str], config: &str) -> Output {
    let path = dir.join("run.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_geomech"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir)
        .env_remove("GEOMECH_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Header and columns of a CSV file.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect::<Vec<_>>();
    let mut cols = vec![Vec::new(); header.len()];
    for rec in r.records() {
        for (c, field) in cols.iter_mut().zip(rec.unwrap().iter()) {
            c.push(field.parse::<f64>().unwrap());
        }
    }
    (header, cols)
}

fn reported(out: &str, name: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("no `{name}` in {out}"));
    line[name.len()..].split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn compare_central_force_matches_library_run() {
    let dir = TempDir::new().unwrap();
    let o = geomech(dir.path(), &["compare"], r#"{"system": "central_force", "outputs": {"csv": "full.csv"}}"#);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dev = reported(&stdout(&o), "max base deviation");
    assert!(dev <= 1e-5, "{dev}");
    assert!(reported(&stdout(&o), "momentum drift") <= 1e-8);

    let b = central_force();
    let span = TimeSpan::new(0.0, 10.0, 1e-3).unwrap();
    let want = simulate(&b.system, &b.q0, &b.v0, &span, &[]).unwrap();
    let (_, cols) = read_csv(&dir.path().join("full.csv"));
    assert_eq!(cols[0].len(), want.len());
    for k in (0..want.len()).step_by(997) {
        assert_eq!(cols[1][k], want.q(k)[0]);
        assert_eq!(cols[2][k], want.q(k)[1]);
        assert_eq!(cols[3][k], want.v(k)[0]);
    }
}

#[test]
fn malformed_lagrangian_reports_parser_offset() {
    let dir = TempDir::new().unwrap();
    let src = "0.5*v1^2 - (q1*";
    let config = format!(r#"{{"system": {{"dim": 1, "lagrangian": "{src}"}}, "ic": {{"q": [1], "v": [0]}}}}"#);
    let o = geomech(dir.path(), &["simulate"], &config);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&format!("byte {}", src.len())), "{}", stderr(&o));
    assert!(!dir.path().join("simulate.csv").exists());
}

#[test]
fn aks_sl2_trace_column_is_constant_and_matches_the_lax_block() {
    let dir = TempDir::new().unwrap();
    let o = geomech(dir.path(), &["aks"], r#"{"system": "aks_sl2", "outputs": {"diagnostics": ["stationarity"]}}"#);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, cols) = read_csv(&dir.path().join("aks.csv"));
    let want: Vec<&str> = "t,q1,q2,q3,q4,v1,v2,v3,v4,p1,p2,p3,p4,lam_tr2,lam_tr3,stationarity".split(',').collect();
    assert_eq!(header, want);
    assert_eq!(cols[0].len(), 10_001);
    let tr2 = &cols[13];
    let drift = tr2.iter().fold(0.0f64, |m, x| m.max((x - tr2[0]).abs()));
    assert!(drift <= 1e-6, "{drift}");
    // p holds Lambda row-major: tr(Lambda^2) = a^2 + 2bc + d^2.
    for k in (0..tr2.len()).step_by(1000) {
        let (a, b, c, d) = (cols[9][k], cols[10][k], cols[11][k], cols[12][k]);
        assert!((a * a + 2.0 * b * c + d * d - tr2[k]).abs() < 1e-14);
    }
    // g stays in SL(2).
    for k in (0..tr2.len()).step_by(1000) {
        assert!((cols[1][k] * cols[4][k] - cols[2][k] * cols[3][k] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn csv_header_row_count_and_precision() {
    let dir = TempDir::new().unwrap();
    for (dt, rows) in [(0.3, 4), (0.1, 11), (0.25, 5)] {
        let config = format!(
            r#"{{"system": "magnetic_kk", "integration": {{"t0": 0, "t1": 1, "dt": {dt}}},
                "outputs": {{"csv": "m.csv", "diagnostics": ["energy", "J1", "lagrangian"]}}}}"#
        );
        let o = geomech(dir.path(), &["simulate"], &config);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,q1,q2,q3,v1,v2,v3,p1,p2,p3,energy,J1,lagrangian"));
        let body: Vec<&str> = lines.collect();
        assert_eq!(body.len(), rows, "dt = {dt}");
        for field in body[1].split(',') {
            let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{field}");
        }
    }
}

#[test]
fn sidecar_reproduces_the_run_bit_for_bit() {
    let first = TempDir::new().unwrap();
    let config = r#"{"system": {"dim": 2, "lagrangian": "0.5*(v1^2 + v2^2) - k*(q1^2 + q2^2)/2 + c*q1*v2",
                                "force": ["-0.1*v1", "0"], "params": {"k": 1.5, "c": 0.3}},
                     "ic": {"q": [1, 0], "v": [0, 0.5]},
                     "integration": {"t1": 2, "dt": 0.01},
                     "outputs": {"csv": "traj/run.csv", "diagnostics": ["energy", "el_residual"]}}"#;
    let o = geomech(first.path(), &["simulate"], config);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sidecar = first.path().join("traj/run.csv.config.json");
    let second = TempDir::new().unwrap();
    let o = geomech(second.path(), &["simulate"], &std::fs::read_to_string(&sidecar).unwrap());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = std::fs::read(first.path().join("traj/run.csv")).unwrap();
    let b = std::fs::read(second.path().join("traj/run.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(std::fs::read(&sidecar).unwrap(), std::fs::read(second.path().join("traj/run.csv.config.json")).unwrap());
}

#[test]
fn sidecar_records_defaults() {
    let dir = TempDir::new().unwrap();
    let o = geomech(dir.path(), &["simulate", "--dt", "0.5"], r#"{"system": "harmonic"}"#);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("simulate.csv.config.json")).unwrap()).unwrap();
    assert_eq!(v["integration"]["dt"], 0.5);
    assert_eq!(v["integration"]["t1"], 10.0);
    assert_eq!(v["ic"]["q"][0], 1.0);
    assert_eq!(v["mode"], "simulate");
    assert_eq!(v["tolerances"]["compare"], 1e-5);
    assert!(v["seed"].is_u64());
}

#[test]
fn tight_tolerance_fails_with_exit_4() {
    let dir = TempDir::new().unwrap();
    let o = geomech(dir.path(), &["compare"], r#"{"system": "central_force", "tolerances": {"compare": 1e-15}}"#);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("max base deviation"), "{}", stderr(&o));
    let o = geomech(dir.path(), &["check"], r#"{"system": "harmonic", "tolerances": {"energy": 1e-16}}"#);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("energy drift"), "{}", stderr(&o));
}

#[test]
fn validation_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    for (mode, config) in [
        ("simulate", r#"{"system": "harmonic", "integration": {"t0": 1, "t1": 0}}"#),
        ("simulate", r#"{"system": "harmonic", "integration": {"dt": 0}}"#),
        ("simulate", r#"{"system": "pendulum"}"#),
        ("simulate", r#"{"system": "harmonic", "ic": {"q": [1, 2], "v": [0]}}"#),
        ("simulate", r#"{"system": "harmonic", "outputs": {"diagnostics": ["J1"]}}"#),
        ("simulate", r#"{"system": {"dim": 1, "lagrangian": "v1^2/2 - q2"}, "ic": {"q": [1], "v": [0]}}"#),
        ("simulate", r#"{"system": {"dim": 1, "lagrangian": "v1^2/2"}}"#),
        ("reduce", r#"{"system": "harmonic"}"#),
        ("aks", r#"{"system": "central_force"}"#),
        ("compare", r#"{"system": "aks_sl2"}"#),
        ("check", r#"{"system": "harmonic", "mode": "compare"}"#),
        ("check", r#"{"system": "harmonic", "tolerances": {"residual": -1}}"#),
        (
            "compare",
            r#"{"system": {"dim": 2, "lagrangian": "0.5*(v1^2 + q1^2*v2^2)"}, "ic": {"q": [1, 0], "v": [0, 1]},
                "symmetry": {"generators": [["0", "v1"]], "connection": {"group": [2]}, "mu": [1]}}"#,
        ),
        (
            "compare",
            r#"{"system": {"dim": 2, "lagrangian": "0.5*(v1^2 + q1^2*v2^2)"}, "ic": {"q": [1, 0], "v": [0, 1]},
                "symmetry": {"generators": [["0", "1"]], "connection": {"group": [2], "A": [["q2"]]}, "mu": [1]}}"#,
        ),
        ("simulate", r#"{"system": "harmonic", "unknown": 1}"#),
    ] {
        let o = geomech(dir.path(), &[mode], config);
        assert_eq!(o.status.code(), Some(2), "{mode} {config}: {}", stderr(&o));
        assert!(stderr(&o).contains("validation error"), "{}", stderr(&o));
    }
}

#[test]
fn numerical_failures_exit_3() {
    let dir = TempDir::new().unwrap();
    // Linear in the velocity: singular mass matrix.
    let o = geomech(dir.path(), &["simulate"], r#"{"system": {"dim": 1, "lagrangian": "v1 - q1^2"}, "ic": {"q": [1], "v": [0]}}"#);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    // q'' = 2 q^3 from q = 1 blows up at t = 1.
    let o = geomech(
        dir.path(),
        &["simulate"],
        r#"{"system": {"dim": 1, "lagrangian": "v1^2/2 + q1^4/2"}, "ic": {"q": [1], "v": [1]},
            "outputs": {"csv": "blowup.csv"}}"#,
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("aborted at t ="), "{}", stderr(&o));
    let (_, cols) = read_csv(&dir.path().join("blowup.csv"));
    let last = *cols[0].last().unwrap();
    assert!(last > 0.9 && last < 1.1, "partial run ends at {last}");
}

#[test]
fn expression_oscillator_follows_cosine() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"system": {"dim": 1, "lagrangian": "m*v1^2/2 - m*w^2*q1^2/2", "params": {"m": 2, "w": 3}},
                     "ic": {"q": [1], "v": [0]}, "integration": {"t1": 2},
                     "outputs": {"csv": "osc.csv", "diagnostics": ["energy"]}}"#;
    let o = geomech(dir.path(), &["simulate"], config);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, cols) = read_csv(&dir.path().join("osc.csv"));
    for k in 0..cols[0].len() {
        let t = cols[0][k];
        assert!((cols[1][k] - (3.0 * t).cos()).abs() < 1e-6, "t = {t}");
        assert!((cols[3][k] - 2.0 * cols[2][k]).abs() < 1e-6, "p = m v at t = {t}");
        assert!((cols[4][k] - 9.0).abs() < 1e-6);
    }
}

#[test]
fn expression_magnetic_system_reduces_and_checks() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"system": {"dim": 3, "lagrangian": "0.5*(v1^2 + v2^2) + 0.5*(v3 - q2/2*v1 + q1/2*v2)^2"},
                     "symmetry": {"generators": [["0", "0", "1"]],
                                  "connection": {"group": [3], "A": [["-q2/2", "q1/2"]]}, "mu": [1]},
                     "ic": {"q": [0.3, -0.2, 0], "v": [1, 0, 0.9]},
                     "integration": {"t1": 1}}"#;
    let o = geomech(dir.path(), &["compare"], config);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(reported(&stdout(&o), "max base deviation") <= 1e-5);
    let o = geomech(dir.path(), &["check", "--jobs", "2"], config);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["energy drift", "J1 drift", "lagrangian invariance", "residual, random frame"] {
        assert!(stdout(&o).contains(name), "{}", stdout(&o));
    }
    // The reduced motion is the planar Lorentz circle: speed stays 1.
    let o = geomech(dir.path(), &["reduce"], config);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, cols) = read_csv(&dir.path().join("reduce.csv"));
    assert_eq!(header, ["t", "q1", "q2", "v1", "v2", "p1", "p2"]);
    for k in 0..cols[0].len() {
        assert!((cols[3][k].hypot(cols[4][k]) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn seed_only_moves_the_random_frame() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"system": "central_force", "integration": {"t1": 2}}"#).unwrap();
    let run = |seed: &str, jobs: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_geomech"))
            .args(["check", "--jobs", jobs, "--out"])
            .arg(dir.path())
            .arg("--config")
            .arg(&path)
            .env("GEOMECH_SEED", seed)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        stdout(&o)
    };
    let a = run("1", "1");
    assert_eq!(a, run("1", "3"));
    let b = run("2", "1");
    let random = |s: &str| reported(s, "residual, random frame");
    assert_ne!(random(&a), random(&b));
    assert_eq!(reported(&a, "residual, coordinate frame"), reported(&b, "residual, coordinate frame"));
    assert_eq!(reported(&a, "energy drift"), reported(&b, "energy drift"));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("check.config.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 2);
}
