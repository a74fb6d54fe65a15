use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kinetic-stils"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn solve_zero_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.json", r#"{"T": 1, "nt": 4, "nx": 4, "v": 1}"#);
    let out = dir.path().join("zero.csv");
    let o = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("zero.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["l2_f"], 0.0);
    assert!(summary["ratio"].is_null());
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.starts_with("t,x,u,f,g\n"));
    assert_eq!(csv.lines().count(), 1 + 25);
}

#[test]
fn solve_manufactured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"T": 1, "nt": 8, "nx": 8, "v": 1, "G": "sin(pi*x) + pi*t*cos(pi*x)", "solver": {"tol": 1e-11}}"#,
    );
    let o = run(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["ratio"].as_f64().unwrap() <= 2.0);
    assert_eq!(summary["pass"], true);
}

#[test]
fn malformed_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"T": 1, "nt": "#);
    let o = run(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let cfg = write(dir.path(), "expr.json", r#"{"T": 1, "nt": 4, "nx": 4, "v": 1, "G": "sin(x"}"#);
    assert_eq!(run(&["solve", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--config", "/nonexistent/cfg.json"]).status.code(), Some(2));
}

#[test]
fn poincare_single_and_errors() {
    let o = run(&["poincare", "--T", "1", "--v", "1", "--nt", "16", "--nx", "16"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("pass = true"));
    assert_eq!(run(&["poincare", "--T", "-1", "--v", "0"]).status.code(), Some(2));
    let o = run(&["--quiet", "poincare", "--T", "1", "--v", "0", "--nt", "4", "--nx", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn poincare_eigen_cap_is_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"T": 1, "v": 1, "nt": 32, "nx": 32, "eigen": {"max_iter": 1, "tol": 1e-14}}"#,
    );
    assert_eq!(run(&["poincare", "--config", &cfg]).status.code(), Some(4));
}

#[test]
fn poincare_sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = write(dir.path(), "sweep.json", r#"{"v": [-1, 0, 2], "T": [0.5, 1], "n": [8]}"#);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = run(&["poincare", "--sweep", &sweep, "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("v,T,nt,nx,lambda_min,C_h,bound_2T,pass\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn lift_matches_distance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "l.json", r#"{"T": 1, "nt": 5, "nx": 5, "v": 1, "u0": "x", "ub": "t"}"#);
    let out = dir.path().join("g.csv");
    let o = run(&["lift", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,g"));
    for line in lines {
        let c: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((c[2] - (c[1] - c[0]).abs()).abs() <= 1e-12);
    }
}

#[test]
fn convergence_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"T": 1, "nt": 8, "nx": 8, "v": 1, "G": "sin(pi*x) + pi*t*cos(pi*x)",
            "exact": "t*sin(pi*x)", "ladder": [8, 16, 32], "min_order": 1.0}"#,
    );
    let o = run(&["convergence", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    let cfg = write(dir.path(), "c2.json", r#"{"T": 1, "nt": 8, "nx": 8, "v": 1, "exact": "t", "min_order": 50}"#);
    assert_eq!(run(&["convergence", "--config", &cfg]).status.code(), Some(3));
}

#[test]
fn vlasov_catalog_and_violation() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let cfg = write(
        dir.path(),
        "v.json",
        &format!(
            r#"{{"T": 1, "quad_order": 4, "catalog": true,
                "trajectory": {{"x0": [0, 0, 0], "v0": [1, 0, 0], "dt": 0.01, "nsteps": 10,
                "fields": {{"E": ["0", "0", "0"], "B": ["0", "0", "1"]}}, "output": {:?}}}}}"#,
            traj.to_str().unwrap()
        ),
    );
    let out = dir.path().join("ratio.csv");
    let o = run(&["vlasov-check", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(out).unwrap().starts_with("case,lhs,rhs,ratio,bound,pass\n"));
    assert_eq!(std::fs::read_to_string(traj).unwrap().lines().count(), 12);

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"T": 1, "cases": [{"name": "c", "f": "1", "support_x": [[0, 1]],
            "support_v": [[0, 1], [0, 1], [0, 1]], "fields": {"E": ["0", "0", "0"], "B": ["0", "0", "0"]}}]}"#,
    );
    assert_eq!(run(&["vlasov-check", "--config", &bad]).status.code(), Some(2));
}
