use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use singeig::io::{read_field, read_field_on, read_mask, write_field, write_mask};
use singeig::{RawConfig, RunConfig};
use singeig_core::oracle::{shoot_eig_1d, RadialSpec};
use singeig_core::{build_domain, DomainSpec, MaskSpec, ScalarField};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singeig")).current_dir(dir).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|x| x.unwrap().iter().map(String::from).collect()));
    rows
}

const INTERVAL: &str = "domain.shape = interval\ngrid.n = 128\noperator.kind = laplacian\noutput.dir = out\noutput.prefix = t\n";

#[test]
fn eig_on_interval_laplacian() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.cfg", INTERVAL);
    let out = run(dir.path(), &["eig", "a.cfg"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("out/t_eig.csv"));
    assert_eq!(rows[0], ["lambda", "residual", "cw_lower", "iterations", "method", "status"]);
    let lambda: f64 = rows[1][0].parse().unwrap();
    let oracle = shoot_eig_1d(&RadialSpec::laplacian_interval(0.0, 1.0)).unwrap();
    assert!((lambda - oracle).abs() < 1e-2 * oracle, "{lambda} vs {oracle}");
    assert_eq!(rows[1][5], "ok");
    let (h, phi) = read_field(&dir.path().join("out/t_phi.txt")).unwrap();
    assert_eq!((h.nx, h.ny), (129, 1));
    assert!(phi.iter().all(|&v| v >= 0.0));
}

#[test]
fn minus_eigenfunction_is_negative() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.cfg", INTERVAL);
    let out = run(dir.path(), &["eig", "a.cfg", "--set", "eigen.sign=minus", "--set", "operator.kind=pucci_plus", "--set", "operator.A=2"]);
    assert_eq!(out.status.code(), Some(0));
    let (_, phi) = read_field(&dir.path().join("out/t_phi.txt")).unwrap();
    assert!(phi.iter().all(|&v| v <= 0.0));
}

#[test]
fn solve_with_zero_forcing_dumps_zeros() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.cfg", "domain.shape = disk\ngrid.n = 16\nforcing.constant = 0\noutput.dir = out\noutput.prefix = z\n");
    let out = run(dir.path(), &["solve", "a.cfg"]);
    assert_eq!(out.status.code(), Some(0));
    let (h, v) = read_field(&dir.path().join("out/z_u.txt")).unwrap();
    assert_eq!((h.nx, h.ny), (19, 19));
    assert!(v.iter().any(|x| x.is_nan()), "exterior nodes are written as nan");
    assert!(v.iter().filter(|x| !x.is_nan()).all(|&x| x == 0.0));
    let text = fs::read_to_string(dir.path().join("out/z_u.txt")).unwrap();
    assert!(text.split_whitespace().any(|t| t == "nan"));
}

#[test]
fn sweep_over_empty_list_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.cfg", &format!("{INTERVAL}sweep.key = operator.alpha\nsweep.values =\n"));
    let out = run(dir.path(), &["sweep", "a.cfg"]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("out/t_sweep.csv")).unwrap();
    assert_eq!(text, "value,lambda,residual,cw_lower,iterations,method,status\n");
}

#[test]
fn sweep_rows_follow_declared_order() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{INTERVAL}forcing.constant = -1\nsweep.command = solve\nsweep.key = forcing.lambda\nsweep.values = 5, -3, 0\n");
    write_config(dir.path(), "a.cfg", &body);
    let out = run(dir.path(), &["sweep", "a.cfg"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("out/t_sweep.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!([&rows[1][0], &rows[2][0], &rows[3][0]], ["5", "-3", "0"]);
    let sup: Vec<f64> = rows[1..].iter().map(|r| r[7].parse().unwrap()).collect();
    // The solution grows with lambda below the principal eigenvalue.
    assert!(sup[1] < sup[2] && sup[2] < sup[0]);
}

#[test]
fn config_errors_exit_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.cfg", "grid.n = 8\n\noperator.colour = red\n");
    let out = run(dir.path(), &["eig", "a.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("a.cfg:3") && err.contains("operator.colour"), "{err}");

    write_config(dir.path(), "b.cfg", "operator.kind = pucci_plus\noperator.a = 2\noperator.A = 1\n");
    assert_eq!(run(dir.path(), &["eig", "b.cfg"]).status.code(), Some(2));
    write_config(dir.path(), "c.cfg", "grid.n = 8\ngrid.n = 9\n");
    let out = run(dir.path(), &["solve", "c.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c.cfg:2"));
    assert_eq!(run(dir.path(), &["eig", "missing.cfg"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["frobnicate", "c.cfg"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_1_with_failed_row() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{INTERVAL}operator.alpha = -0.5\nsolver.max_iter = 1\n");
    write_config(dir.path(), "a.cfg", &body);
    let out = run(dir.path(), &["solve", "a.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let rows = csv_rows(&dir.path().join("out/t_solve.csv"));
    assert_eq!(rows[1][0], "failed");
    assert!(!dir.path().join("out/t_u.txt").exists());
}

#[test]
fn verify_exit_status_follows_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{}verify.suite = hopf\nverify.resolutions = 32, 64\n", INTERVAL.replace("grid.n = 128", "grid.n = 32"));
    write_config(dir.path(), "a.cfg", &body);
    let out = run(dir.path(), &["verify", "a.cfg"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("out/t_verify.csv"));
    assert_eq!(rows[0], ["check", "case", "n", "measured", "threshold", "verdict"]);
    assert_eq!(rows[1][2], "32;64");
    assert_eq!(rows[1][5], "pass");
    let out = run(dir.path(), &["verify", "a.cfg", "--set", "verify.hopf_min=1e6"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let body = "domain.shape = disk\ngrid.n = 12\noperator.kind = pucci_plus\noperator.A = 2\noperator.alpha = -0.5\n\
                verify.suite = comparison, simplicity\nverify.pairs = 3\nverify.resolutions = 12, 16\nverify.seeds = 4, 5\n";
    write_config(dir.path(), "a.cfg", body);
    let a = run(dir.path(), &["verify", "a.cfg", "--out", "one"]);
    let b = run(dir.path(), &["verify", "a.cfg", "--out", "two"]);
    assert_eq!(a.status.code(), b.status.code());
    for f in ["run_verify.csv", "run_verify_details.csv"] {
        let x = fs::read(dir.path().join("one").join(f)).unwrap();
        let y = fs::read(dir.path().join("two").join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn mask_domain_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    // A 9x9 lattice: boundary ring, interior square.
    let n = 9;
    let classes = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 { 2 } else { 1 }
        })
        .collect();
    let m = MaskSpec { nx: n, ny: n, xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0, classes };
    write_mask(&m, &dir.path().join("sq.mask")).unwrap();
    assert_eq!(read_mask(&dir.path().join("sq.mask")).unwrap(), m);
    write_config(dir.path(), "a.cfg", "domain.shape = mask\ndomain.mask_file = sq.mask\noutput.dir = out\n");
    let out = run(dir.path(), &["eig", "a.cfg"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("out/run_eig.csv"));
    let lambda: f64 = rows[1][0].parse().unwrap();
    // The mask reproduces the lattice of the analytic unit square at n = 8.
    write_config(dir.path(), "b.cfg", "domain.shape = rectangle\ngrid.n = 8\noutput.dir = out\noutput.prefix = sq\n");
    assert_eq!(run(dir.path(), &["eig", "b.cfg"]).status.code(), Some(0));
    let square: f64 = csv_rows(&dir.path().join("out/sq_eig.csv"))[1][0].parse().unwrap();
    assert!((lambda - square).abs() < 1e-9 * square, "{lambda} vs {square}");
}

#[test]
fn field_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let g = build_domain(&DomainSpec::annulus(0.3, 1.0), 20).unwrap();
    let u = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin() * x[1].exp() / 7.0);
    let p = dir.path().join("u.txt");
    write_field(&u, &g, &p).unwrap();
    let v = read_field_on(&g, &p).unwrap();
    for i in 0..g.len() {
        assert_eq!(u.get(i).to_bits(), v.get(i).to_bits());
    }
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for e in fs::read_dir(&root).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "cfg") {
            let raw = RawConfig::load(&p).unwrap_or_else(|e| panic!("{e}"));
            RunConfig::from_raw(&raw).unwrap_or_else(|e| panic!("{e}"));
            count += 1;
        }
    }
    assert!(count >= 13);
}
