//! Subcommand implementations. Each writes its tables under the output
//! directory and returns the process exit status.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use singeig_core::{
    barrier_constant, bisect_lambda, build_domain, check_barrier_supersolution, check_comparison,
    check_distance_refinement, check_domain_monotonicity, check_hopf_refinement, check_no_positive_solution,
    check_simplicity_refinement, default_bracket, estimate_holder, isolation_scan, power_iterate,
    random_forcing_pair, reflect_spec, BarrierSpec, CheckReport, DomainSpec, EigMethod, EigResult, Grid,
    OperatorSpec, ScalarField, Shape, Verdict,
};

use crate::config::{ConfigError, RawConfig, RunConfig, Sign};
use crate::io::{self, Cell, IoError, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const SOLVE_COLUMNS: &[&str] =
    &["status", "converged", "residual", "outer_iterations", "inner_iterations", "delta", "sup_norm", "error"];
pub const EIG_COLUMNS: &[&str] = &["lambda", "residual", "cw_lower", "iterations", "method", "status"];
pub const VERIFY_COLUMNS: &[&str] = &["check", "case", "n", "measured", "threshold", "verdict"];
pub const DETAIL_COLUMNS: &[&str] = &["check", "case", "n", "key", "value"];

/// Amplitude, ellipticity ratio and forcing bound of the barrier suite.
const BARRIER_AMPLITUDE: f64 = 0.01;
const BARRIER_L: f64 = 1.0;
/// Power-step budget of each isolation run.
const SCAN_ITERATIONS: usize = 300;
/// Separation of the random comparison forcings.
const FORCING_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Eig,
    Verify,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Eig => "eig",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(#[from] IoError),
    #[error("{0}")]
    Setup(singeig_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_FAILURE,
            CliError::Config(_) | CliError::Setup(_) => EXIT_USAGE,
        }
    }
}

/// Files written by a run and its exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit: i32,
    pub files: Vec<PathBuf>,
}

pub fn run(cmd: Command, raw: &RawConfig, out_dir: Option<&Path>) -> Result<Outcome, CliError> {
    let mut rc = RunConfig::from_raw(raw)?;
    if let Some(d) = out_dir {
        rc.output_dir = d.to_path_buf();
    }
    fs::create_dir_all(&rc.output_dir)
        .map_err(|source| IoError::Io { path: rc.output_dir.display().to_string(), source })?;
    match cmd {
        Command::Solve => solve(&rc),
        Command::Eig => eig(&rc),
        Command::Verify => verify(&rc),
        Command::Sweep => sweep(raw, &rc),
    }
}

fn out_path(rc: &RunConfig, suffix: &str) -> PathBuf {
    rc.output_dir.join(format!("{}_{suffix}", rc.prefix))
}

fn grid(rc: &RunConfig, n: usize) -> Result<Grid, CliError> {
    let g = build_domain(&rc.domain, n).map_err(CliError::Setup)?;
    rc.operator.validate_for(&g).map_err(CliError::Setup)?;
    Ok(g)
}

fn failed(n: usize) -> Vec<Cell> {
    let mut row = vec![Cell::from("failed")];
    row.extend((1..n).map(|_| Cell::Float(f64::NAN)));
    row
}

/// Forcing equal to `value` inside and zero on the boundary.
fn constant_forcing(g: &Grid, value: f64) -> ScalarField {
    let mut f = ScalarField::constant(g, value);
    for i in g.boundary_nodes().collect::<Vec<_>>() {
        f.set(i, 0.0);
    }
    f
}

fn solve_row(rc: &RunConfig, g: &Grid) -> (Vec<Cell>, Option<ScalarField>, bool) {
    let f = constant_forcing(g, rc.forcing);
    match singeig_core::solve_dirichlet(&rc.operator, g, &f, rc.lambda, &rc.solve) {
        Ok((u, rep)) => {
            let row = vec![
                Cell::from(if rep.converged { "ok" } else { "failed" }),
                Cell::from(usize::from(rep.converged)),
                rep.residual.into(),
                rep.outer_iterations.into(),
                rep.inner_iterations.into(),
                rep.delta.into(),
                u.sup_norm().into(),
                Cell::from(""),
            ];
            (row, Some(u), rep.converged)
        }
        Err(e) => {
            let mut row = failed(SOLVE_COLUMNS.len());
            row[SOLVE_COLUMNS.len() - 1] = Cell::Text(e.to_string());
            (row, None, false)
        }
    }
}

fn solve(rc: &RunConfig) -> Result<Outcome, CliError> {
    let g = grid(rc, rc.n)?;
    let (row, u, ok) = solve_row(rc, &g);
    let mut files = Vec::new();
    if let Some(u) = u {
        let p = out_path(rc, "u.txt");
        io::write_field(&u, &g, &p)?;
        files.push(p);
    }
    let mut t = Table::new(SOLVE_COLUMNS);
    t.push(row);
    let p = out_path(rc, "solve.csv");
    io::write_csv(&t, &p)?;
    files.push(p);
    Ok(Outcome { exit: if ok { EXIT_OK } else { EXIT_FAILURE }, files })
}

fn first_seed(rc: &RunConfig) -> u64 {
    rc.verify.seeds.first().copied().unwrap_or(0)
}

/// The configured eigenpair: `lambda+` or `lambda-`, by power iteration or
/// bisection.
pub fn eigenpair(rc: &RunConfig, g: &Grid) -> singeig_core::Result<EigResult> {
    let e = &rc.eigen;
    let spec = match e.sign {
        Sign::Plus => rc.operator.clone(),
        Sign::Minus => reflect_spec(&rc.operator),
    };
    let mut r = match e.method {
        EigMethod::Power => power_iterate(&spec, g, &e.config, first_seed(rc))?,
        EigMethod::Bisection => {
            let (lo, hi) = match e.bracket {
                Some(b) => b,
                None => default_bracket(&spec, g)?,
            };
            bisect_lambda(&spec, g, &e.config, lo, hi)?
        }
    };
    if e.sign == Sign::Minus {
        r.phi.scale(-1.0);
    }
    Ok(r)
}

fn eig_row(r: &singeig_core::Result<EigResult>) -> Vec<Cell> {
    match r {
        Ok(r) => vec![
            r.lambda.into(),
            r.residual.into(),
            r.cw_lower.into(),
            r.iterations.into(),
            r.method.name().into(),
            "ok".into(),
        ],
        Err(_) => {
            let mut row: Vec<Cell> = (0..EIG_COLUMNS.len()).map(|_| Cell::Float(f64::NAN)).collect();
            row[4] = Cell::from("none");
            row[5] = Cell::from("failed");
            row
        }
    }
}

fn eig(rc: &RunConfig) -> Result<Outcome, CliError> {
    let g = grid(rc, rc.n)?;
    let r = eigenpair(rc, &g);
    let mut files = Vec::new();
    if let Ok(r) = &r {
        let p = out_path(rc, "phi.txt");
        io::write_field(&r.phi, &g, &p)?;
        files.push(p);
    }
    if let Err(e) = &r {
        eprintln!("eig: {e}");
    }
    let mut t = Table::new(EIG_COLUMNS);
    t.push(eig_row(&r));
    let p = out_path(rc, "eig.csv");
    io::write_csv(&t, &p)?;
    files.push(p);
    Ok(Outcome { exit: if r.is_ok() { EXIT_OK } else { EXIT_FAILURE }, files })
}

/// The validated configuration of every sweep point, in declared order.
pub fn sweep_points(raw: &RawConfig, rc: &RunConfig) -> Result<Vec<(String, RunConfig)>, CliError> {
    let Some(sw) = &rc.sweep else {
        return Err(ConfigError { path: raw.path.clone(), line: None, message: "sweep needs sweep.key".into() }.into());
    };
    let mut points = Vec::with_capacity(sw.values.len());
    for v in &sw.values {
        let mut r = raw.clone();
        r.set(&format!("{}={v}", sw.key))?;
        let mut p = RunConfig::from_raw(&r)?;
        p.output_dir = rc.output_dir.clone();
        points.push((v.clone(), p));
    }
    Ok(points)
}

fn sweep(raw: &RawConfig, rc: &RunConfig) -> Result<Outcome, CliError> {
    let points = sweep_points(raw, rc)?;
    let sw = rc.sweep.as_ref().expect("sweep_points checked sweep.key");
    let columns: &[&str] = if sw.command == "solve" { SOLVE_COLUMNS } else { EIG_COLUMNS };
    let schema: Vec<&'static str> = std::iter::once("value").chain(columns.iter().copied()).collect();
    let mut t = Table::new(&schema);
    let mut ok = true;
    for (v, p) in &points {
        let g = grid(p, p.n)?;
        let (row, good) = if sw.command == "solve" {
            let (row, _, good) = solve_row(p, &g);
            (row, good)
        } else {
            let r = eigenpair(p, &g);
            (eig_row(&r), r.is_ok())
        };
        ok &= good;
        let mut full = vec![Cell::Text(v.clone())];
        full.extend(row);
        t.push(full);
    }
    let p = out_path(rc, "sweep.csv");
    io::write_csv(&t, &p)?;
    Ok(Outcome { exit: if ok { EXIT_OK } else { EXIT_FAILURE }, files: vec![p] })
}

fn case_name(spec: &OperatorSpec, g: &Grid) -> String {
    format!("{}/{}/alpha={}", spec.kind.name(), g.shape().name(), spec.alpha)
}

fn error_report(check: &str, case: String, n: Vec<usize>, e: &singeig_core::Error) -> CheckReport {
    CheckReport {
        check: check.into(),
        case,
        n,
        measured: f64::NAN,
        threshold: f64::NAN,
        verdict: Verdict::Inconclusive,
        witness: None,
        details: vec![(format!("error: {e}"), f64::NAN)],
    }
}

/// Seed of comparison pair `k`, drawn from the configured seed list.
fn pair_seed(seeds: &[u64], k: usize) -> u64 {
    let base = seeds.get(k % seeds.len().max(1)).copied().unwrap_or(0);
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (k / seeds.len().max(1)) as u64
}

/// The same shape shrunk by `t` about its centre.
pub fn shrunk(d: &DomainSpec, t: f64) -> Option<DomainSpec> {
    let shape = match &d.shape {
        Shape::Interval { x0, length } => Shape::Interval { x0: x0 + 0.5 * (1.0 - t) * length, length: t * length },
        Shape::Rectangle { origin, lx, ly } => Shape::Rectangle {
            origin: [origin[0] + 0.5 * (1.0 - t) * lx, origin[1] + 0.5 * (1.0 - t) * ly],
            lx: t * lx,
            ly: t * ly,
        },
        Shape::Disk { center, radius } => Shape::Disk { center: *center, radius: t * radius },
        Shape::Annulus { .. } | Shape::Mask(_) => return None,
    };
    Some(DomainSpec { shape, scale: d.scale })
}

struct Verifier<'a> {
    rc: &'a RunConfig,
    grids: BTreeMap<usize, Grid>,
    eigen: BTreeMap<usize, singeig_core::Result<EigResult>>,
}

impl<'a> Verifier<'a> {
    fn grid(&mut self, n: usize) -> Result<Grid, CliError> {
        if let Some(g) = self.grids.get(&n) {
            return Ok(g.clone());
        }
        let g = grid(self.rc, n)?;
        self.grids.insert(n, g.clone());
        Ok(g)
    }

    fn eigen(&mut self, n: usize) -> Result<singeig_core::Result<EigResult>, CliError> {
        if !self.eigen.contains_key(&n) {
            let g = self.grid(n)?;
            let r = power_iterate(&self.rc.operator, &g, &self.rc.eigen.config, first_seed(self.rc));
            self.eigen.insert(n, r);
        }
        Ok(self.eigen[&n].clone())
    }

    fn pair(&self) -> (usize, usize) {
        let r = &self.rc.verify.resolutions;
        (r[0], *r.get(1).unwrap_or(&(2 * r[0])))
    }

    fn run(&mut self, suite: &str, out: &mut Vec<CheckReport>) -> Result<(), CliError> {
        let rc = self.rc;
        let v = &rc.verify;
        let spec = &rc.operator;
        match suite {
            "comparison" => {
                for &n in &v.resolutions {
                    let g = self.grid(n)?;
                    for k in 0..v.pairs {
                        let (f1, f2) = random_forcing_pair(&g, pair_seed(&v.seeds, k), FORCING_MARGIN);
                        out.push(
                            check_comparison(spec, &g, &f1, &f2, rc.lambda, &rc.solve)
                                .unwrap_or_else(|e| error_report("comparison", case_name(spec, &g), vec![n], &e)),
                        );
                    }
                }
            }
            "simplicity" => {
                let (nc, nf) = self.pair();
                let (gc, gf) = (self.grid(nc)?, self.grid(nf)?);
                let noise = 10.0 * rc.eigen.config.residual_tol;
                out.push(
                    check_simplicity_refinement(spec, &gc, &gf, &rc.eigen.config, &v.seeds, v.tolerance, noise)
                        .unwrap_or_else(|e| error_report("simplicity_refinement", case_name(spec, &gf), vec![nc, nf], &e)),
                );
            }
            "hopf" | "distance" => {
                let (nc, nf) = self.pair();
                let (gc, gf) = (self.grid(nc)?, self.grid(nf)?);
                let check = if suite == "hopf" { "hopf_refinement" } else { "distance_refinement" };
                let r = match (self.eigen(nc)?, self.eigen(nf)?) {
                    (Ok(a), Ok(b)) => {
                        let res = if suite == "hopf" {
                            check_hopf_refinement((&gc, &a.phi), (&gf, &b.phi), v.hopf_min)
                        } else {
                            check_distance_refinement((&gc, &a.phi), (&gf, &b.phi))
                        };
                        res.unwrap_or_else(|e| error_report(check, case_name(spec, &gf), vec![nc, nf], &e))
                    }
                    (Err(e), _) | (_, Err(e)) => error_report(check, case_name(spec, &gf), vec![nc, nf], &e),
                };
                out.push(r);
            }
            "monotonicity" => {
                let Some(inner) = shrunk(&rc.domain, v.inner_scale) else {
                    let g = self.grid(rc.n)?;
                    let e = singeig_core::Error::InvalidDomain("no shrunken copy for this shape".into());
                    out.push(error_report("domain_monotonicity", case_name(spec, &g), vec![rc.n], &e));
                    return Ok(());
                };
                let g = self.grid(rc.n)?;
                out.push(
                    check_domain_monotonicity(spec, &rc.domain, &inner, rc.n, &rc.eigen.config, v.rel_tol)
                        .unwrap_or_else(|e| error_report("domain_monotonicity", case_name(spec, &g), vec![rc.n], &e)),
                );
            }
            "isolation" => {
                let g = self.grid(rc.n)?;
                let case = case_name(spec, &g);
                let plus = self.eigen(rc.n)?;
                let minus = power_iterate(&reflect_spec(spec), &g, &rc.eigen.config, first_seed(rc));
                let r = match (plus, minus) {
                    (Ok(p), Ok(m)) => {
                        let l1 = p.lambda.max(m.lambda);
                        let lambdas: Vec<f64> = v.scan_factors.iter().map(|s| s * l1).collect();
                        isolation_scan(spec, &g, l1, p.lambda, &rc.eigen.config, &lambdas, &v.seeds, SCAN_ITERATIONS)
                            .unwrap_or_else(|e| error_report("isolation", case.clone(), vec![rc.n], &e))
                    }
                    (Err(e), _) | (_, Err(e)) => error_report("isolation", case, vec![rc.n], &e),
                };
                out.push(r);
            }
            "holder" => {
                for &n in &v.resolutions {
                    let g = self.grid(n)?;
                    let case = case_name(spec, &g);
                    let fit = self.eigen(n)?.and_then(|r| estimate_holder(&r.phi, &g));
                    out.push(match fit {
                        Ok((beta, gamma)) => CheckReport {
                            check: "holder".into(),
                            case,
                            n: vec![n],
                            measured: beta.exponent,
                            threshold: v.holder_min,
                            verdict: if beta.exponent >= v.holder_min && beta.residual < v.holder_residual {
                                Verdict::Pass
                            } else {
                                Verdict::Fail
                            },
                            witness: None,
                            details: vec![
                                ("fit_residual".into(), beta.residual),
                                ("scales".into(), beta.scales as f64),
                                ("value_exponent".into(), gamma.exponent),
                            ],
                        },
                        Err(e) => error_report("holder", case, vec![n], &e),
                    });
                }
            }
            "barrier" => {
                let dim = rc.domain.dimension();
                for &r in &v.radii {
                    let (a, big_a, h) = (spec.a_min, spec.a_max, spec.drift_sup());
                    let case = format!("R={r}");
                    let c = match barrier_constant(dim, r, a, big_a, h, spec.alpha, 0.0, BARRIER_L, BARRIER_L) {
                        Ok(c) => c,
                        Err(e) => {
                            out.push(error_report("barrier_supersolution", case, vec![rc.n], &e));
                            continue;
                        }
                    };
                    let bs = BarrierSpec {
                        center: [0.0, 0.0],
                        radius: r,
                        amplitude: BARRIER_AMPLITUDE,
                        rate: c,
                        l1: BARRIER_L,
                        l2: BARRIER_L,
                        g_inf: 0.0,
                        dimension: dim,
                    };
                    out.push(
                        check_barrier_supersolution(&bs, spec, rc.n)
                            .unwrap_or_else(|e| error_report("barrier_supersolution", case, vec![rc.n], &e)),
                    );
                }
            }
            "no_positive" => {
                let g = self.grid(rc.n)?;
                match self.eigen(rc.n)? {
                    Ok(p) => {
                        let lambda = p.lambda - rc.eigen.config.eig_tol * p.lambda.abs();
                        out.push(
                            check_no_positive_solution(spec, &g, lambda, &rc.solve)
                                .unwrap_or_else(|e| error_report("no_positive", case_name(spec, &g), vec![rc.n], &e)),
                        );
                    }
                    Err(e) => out.push(error_report("no_positive", case_name(spec, &g), vec![rc.n], &e)),
                }
            }
            other => unreachable!("suite `{other}` passed validation"),
        }
        Ok(())
    }
}

/// Runs the configured suites and returns their reports in order.
pub fn verify_reports(rc: &RunConfig) -> Result<Vec<CheckReport>, CliError> {
    let mut v = Verifier { rc, grids: BTreeMap::new(), eigen: BTreeMap::new() };
    let mut out = Vec::new();
    for suite in &rc.verify.suite {
        v.run(suite, &mut out)?;
    }
    Ok(out)
}

fn join_n(n: &[usize]) -> String {
    n.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn verify(rc: &RunConfig) -> Result<Outcome, CliError> {
    let reports = verify_reports(rc)?;
    let mut main = Table::new(VERIFY_COLUMNS);
    let mut details = Table::new(DETAIL_COLUMNS);
    for r in &reports {
        let n = join_n(&r.n);
        main.push(vec![
            r.check.clone().into(),
            r.case.clone().into(),
            n.clone().into(),
            r.measured.into(),
            r.threshold.into(),
            r.verdict.name().into(),
        ]);
        let witness = r.witness.iter().flat_map(|&(node, v)| [("witness_node".to_string(), node as f64), ("witness_value".into(), v)]);
        for (k, val) in r.details.iter().cloned().chain(witness) {
            details.push(vec![r.check.clone().into(), r.case.clone().into(), n.clone().into(), k.into(), val.into()]);
        }
    }
    let p = out_path(rc, "verify.csv");
    let q = out_path(rc, "verify_details.csv");
    io::write_csv(&main, &p)?;
    io::write_csv(&details, &q)?;
    let ok = reports.iter().all(CheckReport::passed);
    Ok(Outcome { exit: if ok { EXIT_OK } else { EXIT_FAILURE }, files: vec![p, q] })
}
