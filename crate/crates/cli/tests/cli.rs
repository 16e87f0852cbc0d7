use std::path::Path;
use std::process::{Command, Output};

fn mpxa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpxa")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn linear_darcy_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("m.json");
    let out = dir.path().join("p.csv");
    let o = mpxa(&["mesh", "gen", "--kind", "cartesian", "--n", "2", "--out", path(&mesh)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = mpxa(&[
        "run", "--physics", "darcy", "--mesh", path(&mesh), "--dirichlet-linear", "1,2,3", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config-hash: "));
    assert_eq!(lines.next().unwrap(), "cell,x,y,p");
    let mut rows = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[3] - (1.0 + 2.0 * v[1] + 3.0 * v[2])).abs() < 1e-10, "{l}");
        rows += 1;
    }
    assert_eq!(rows, 4);
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"physics": "biot", "mesh": {"kind": "perturbed_quad", "n": 6, "perturbation": 0.3, "seed": 4}, "case": "smooth_biot"}"#,
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = mpxa(&["run", "--config", path(&cfg), "--out", path(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (a, b) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().lines().nth(1).unwrap() == "cell,x,y,ux,uy,p");
}

#[test]
fn discretize_writes_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"physics": "darcy", "mesh": {"kind": "triangle", "n": 3}, "case": "smooth_darcy"}"#).unwrap();
    let out = dir.path().join("mats");
    let o = mpxa(&["discretize", "--config", path(&cfg), "--out-dir", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.ends_with(".mtx")), "{names:?}");
    assert!(names.iter().any(|n| n == "config.json"));
}

#[test]
fn monotone_check_on_cartesian() {
    let o = mpxa(&["check-monotone", "--kind", "cartesian", "--n", "6"]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.lines().any(|l| l == "M-matrix: yes"), "{s}");
}

#[test]
fn convergence_csv_has_rate_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rates.csv");
    let o = mpxa(&["convergence", "--case", "thermo_443", "--grid", "perturbed_quad", "--levels", "2..4", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("rate,,"), "{last}");
    let header = text.lines().find(|l| l.starts_with("level,")).unwrap();
    assert_eq!(header.split(',').count(), last.split(',').count());
}

#[test]
fn bad_input_exits_with_one() {
    let o = mpxa(&["run", "--physics", "darcy", "--mesh", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));
    let o = mpxa(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mpxa(&["convergence", "--case", "smooth_darcy", "--levels", "0..2"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mpxa(&["convergence", "--case", "no_such_case"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"physics": "elasticity", "mesh": {"kind": "triangle", "n": 4}, "case": "robustness_layer", "options": {"mode": "strong"}}"#,
    )
    .unwrap();
    let o = mpxa(&["run", "--config", path(&cfg), "--out", path(&dir.path().join("o.csv"))]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("singular local system"));
}

#[test]
fn help_succeeds() {
    assert!(mpxa(&["--help"]).status.success());
    assert!(mpxa(&["convergence", "--help"]).status.success());
}
