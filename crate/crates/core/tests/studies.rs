use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::process::Command;

use axicav::analytic::{bessel_j, bessel_zero};
use axicav::formulation::Transformation;
use axicav::studies::{read_csv, reconstruct_field, run_study, solve_cell, write_csv_to, StudyConfig, StudyKind};

const BIN: &str = env!("CARGO_BIN_EXE_axicav");

fn small_convergence() -> StudyConfig {
    StudyConfig::parse(
        "study = converge\ntransforms = TB, TC(1,1)\nn = 1\np = 1\nq = 2\nmeshes = 2, 4, 8\ntarget = TE111\n",
        None,
    )
    .unwrap()
}

#[test]
fn tm010_field_shape() {
    let mut cfg = StudyConfig::new(StudyKind::Converge);
    cfg.n = 0;
    cfg.p = 2;
    cfg.q = Some(2);
    let j01 = bessel_zero(0, 1).unwrap();
    let cell = solve_cell(&cfg, Transformation::TB, 8, None, 3, j01 * j01).unwrap();
    assert!((cell.spectrum.eigenvalues[0].sqrt() / j01 - 1.0).abs() < 1e-3);
    let x = cell.full_vector(0);
    let f = |r: f64, phi: f64| reconstruct_field(&cell.pair, &x, &Transformation::TB, 0, r, phi, 0.37).unwrap();
    let e0 = f(0.05, 0.0);
    assert!(e0[2].abs() > 1e-3);
    for r in [0.2, 0.45, 0.7, 0.9] {
        let e = f(r, 0.0);
        assert_eq!(e, f(r, 1.3));
        let shape = bessel_j(0, j01 * r).unwrap() / bessel_j(0, j01 * 0.05).unwrap();
        assert!((e[2] / e0[2] - shape).abs() < 1e-2, "r={r}: {} vs {shape}", e[2] / e0[2]);
        assert!(e[0].abs() < 1e-2 * e0[2].abs() && e[1].abs() < 1e-12);
    }
}

#[test]
fn dipole_field_angular_pattern() {
    let mut cfg = StudyConfig::new(StudyKind::Converge);
    cfg.p = 2;
    let cell = solve_cell(&cfg, Transformation::tc(1.0, 1.0), 4, None, 2, 3.0).unwrap();
    let x = cell.full_vector(0);
    let t = Transformation::tc(1.0, 1.0);
    let e = reconstruct_field(&cell.pair, &x, &t, 1, 0.4, FRAC_PI_2, 0.6).unwrap();
    assert!(e[0].abs() < 1e-12 && e[2].abs() < 1e-12 && e[1].abs() > 1e-6);
    let m = reconstruct_field(&cell.pair, &x, &t, -1, 0.4, 0.0, 0.6).unwrap();
    assert!(m[0].abs() < 1e-12 && m[2].abs() < 1e-12);
    assert!(reconstruct_field(&cell.pair, &x, &t, 1, 0.0, 0.0, 0.6).is_err());
}

#[test]
fn study_output_is_deterministic() {
    let cfg = small_convergence();
    let render = || {
        let mut buf = Vec::new();
        write_csv_to(&run_study(&cfg).unwrap().rows, &mut buf).unwrap();
        buf
    };
    let a = render();
    assert_eq!(a, render());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn cli_exit_codes_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(
        dir.path(),
        "good.cfg",
        "study = converge\ntransforms = TB\nn = 1\np = 1\nmeshes = 2, 4, 8\ntarget = TE111\nmin_slope = 1.5\n",
    );
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    let (code, _, err) = run(&["converge", "--config", &good, "--output", out1.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("slope"));
    run(&["converge", "--config", &good, "--output", out2.to_str().unwrap()]);
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
    let rows = read_csv(&out1).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.mode_id == "TE111" && r.rel_error.unwrap() > 0.0));

    let (code, stdout, _) = run(&["converge", "--config", &good]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("study,"));

    let strict = write(
        dir.path(),
        "strict.cfg",
        "study = converge\ntransforms = TB\nn = 1\np = 1\nmeshes = 2, 4\ntarget = TE111\nmin_slope = 50\n",
    );
    assert_eq!(run(&["converge", "--config", &strict]).0, 4);

    let unknown = write(dir.path(), "unknown.cfg", "study = converge\ncolour = blue\ntarget = TE111\n");
    assert_eq!(run(&["converge", "--config", &unknown]).0, 2);
    let bad_tc = write(dir.path(), "tc.cfg", "study = converge\ntransforms = TC(0.25,1)\nn = 1\ntarget = TE111\n");
    assert_eq!(run(&["converge", "--config", &bad_tc]).0, 2);
    let bad_q = write(dir.path(), "q.cfg", "study = converge\nn = 1\np = 3\nq = 2\ntarget = TE111\n");
    assert_eq!(run(&["converge", "--config", &bad_q]).0, 2);
    assert_eq!(run(&["spurious", "--config", &good]).0, 2);
    assert_eq!(run(&["converge", "--config", "/nonexistent/x.cfg"]).0, 2);

    let unwritable = dir.path().join("missing").join("out.csv");
    assert_eq!(run(&["converge", "--config", &good, "--output", unwritable.to_str().unwrap()]).0, 3);
}

#[test]
fn cli_analytic_table() {
    let (code, out, _) = run(&["analytic", "--R", "1", "--L", "1", "--n", "1", "--lmax", "30"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines.len() > 2);
    assert_eq!(lines[0], "family,m,nu,p_idx,omega_over_c0,multiplicity");
    assert!(lines[1].starts_with("TE,1,1,1,3.64136"));
    assert_eq!(run(&["analytic", "--R", "-1", "--lmax", "30"]).0, 2);
}
