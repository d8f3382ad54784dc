use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HP_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn decay_sweep_on_dirichlet_reports_quarter_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = hp(&["decay-sweep", "--plot"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["problem"], "dirichlet_laplacian");
    assert_eq!(s["results"]["theta"], -0.25);
    for slope in s["results"]["ray_slopes"].as_array().unwrap() {
        assert!((slope[1].as_f64().unwrap() + 0.25).abs() <= 0.05);
    }
    let csv = fs::read_to_string(out.join("decay.csv")).unwrap();
    assert!(csv.starts_with("ray_arg,lambda_mod,norm,predicted,fitted_slope\n"));
    assert!(fs::read_to_string(out.join("decay.svg")).unwrap().starts_with("<svg"));
    assert!(out.join("metadata.json").exists());
}

#[test]
fn non_elliptic_problem_exits_two_with_direction() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write(
        dir.path(),
        "wave.json",
        r#"{"n": 2, "m": 1, "interior": {"2,0": [1, 0], "0,2": [-1, 0]},
            "boundary": [{"order": 0, "coeffs": {"0,0": [1, 0]}}], "phi_prime": 3.0, "phi": 2.0}"#,
    );
    let out = dir.path().join("run");
    let o = hp(&["check-ls", "--problem", &problem], &out);
    assert_eq!(o.status.code(), Some(2));
    let s = summary(&out);
    assert_eq!(s["pass"], false);
    assert!(!s["results"]["ellipticity"]["violating"].as_array().unwrap().is_empty());
}

#[test]
fn malformed_input_exits_one_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let bad = write(dir.path(), "bad.json", r#"{"n": 2, "m": 1, "interior": {"2,0": [1, "x"]}}"#);
    let o = hp(&["check-ls", "--problem", &bad], &out);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("interior"), "{err}");

    let cfg = write(dir.path(), "cfg.json", r#"{"tolerance": 0.1, "probes": "many"}"#);
    let o = hp(&["decay-sweep", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("probes"));

    let o = hp(&["poisson-eval", "--problem", "no_such_problem"], &out);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn inadmissible_query_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"k": 1, "s": 0}"#);
    let o = hp(&["decay-sweep", "--config", &cfg], &dir.path().join("run"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = write(dir.path(), "cfg.json", r#"{"samples": 10}"#);
    for out in [&a, &b] {
        let o = hp(&["norm-check", "--seed", "42", "--config", &cfg], out);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["equivalence.csv", "lifting.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    hp(&["norm-check", "--seed", "43", "--config", &cfg], &c);
    assert_ne!(fs::read(a.join("equivalence.csv")).unwrap(), fs::read(c.join("equivalence.csv")).unwrap());
}

#[test]
fn rbound_sim_growth_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"n_list": [4, 16, 64], "trials": 32}"#);
    let out = dir.path().join("run");
    let o = hp(&["rbound-sim", "--p", "1.2", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(summary(&out)["results"]["growth"].as_f64().unwrap() >= 1.5);
    assert_eq!(fs::read_to_string(out.join("rbound.csv")).unwrap().lines().count(), 4);
}

#[test]
fn poisson_eval_runs_on_bundled_problems() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["dirichlet_laplacian", "neumann_laplacian", "clamped_bilaplacian"] {
        let o = hp(&["poisson-eval", "--problem", name], &dir.path().join(name));
        assert_eq!(o.status.code(), Some(0), "{name}");
    }
    let file = concat!(env!("CARGO_MANIFEST_DIR"), "/problems/neumann_laplacian.json");
    let o = hp(&["check-ls", "--problem", file], &dir.path().join("file"));
    assert_eq!(o.status.code(), Some(0));
}
