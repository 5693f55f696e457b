//! Acceptance suite. Every case is set up from a shipped file under
//! `configs/` and prints one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines reach stdout. Set
//! `ACCEPTANCE_ONLY=1,5` to run a subset.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use singeig::commands::{eigenpair, sweep_points, verify_reports};
use singeig::config::{RawConfig, RunConfig};
use singeig_core::oracle::{
    closed_form_eig_1d, oracle_dirichlet_1d, p_laplacian_eig_1d, shoot_eig_1d, shoot_eig_radial, RadialKind, RadialSpec,
};
use singeig_core::{barrier_constant, build_domain, solve_dirichlet, CheckReport, EigMethod, Grid, ScalarField, Verdict};

/// Criteria whose literal statement conflicts with the operator as defined;
/// they print FAIL without failing the run. See the README.
const KNOWN_CONFLICTS: &[u32] = &[2];

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> (RawConfig, RunConfig) {
    let raw = RawConfig::load(&configs().join(name)).unwrap_or_else(|e| panic!("{e}"));
    let rc = RunConfig::from_raw(&raw).unwrap_or_else(|e| panic!("{e}"));
    (raw, rc)
}

fn grid(rc: &RunConfig) -> Grid {
    build_domain(&rc.domain, rc.n).unwrap()
}

fn rel(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

fn all_pass(reports: &[CheckReport]) -> bool {
    !reports.is_empty() && reports.iter().all(CheckReport::passed)
}

fn detail(r: &CheckReport, key: &str) -> f64 {
    r.details.iter().find(|d| d.0 == key).map_or(f64::NAN, |d| d.1)
}

fn c1() -> Outcome {
    let (_, mut rc) = load("acc01_eig_interval_laplacian.cfg");
    let g = grid(&rc);
    let oracle = shoot_eig_1d(&RadialSpec::laplacian_interval(0.0, 1.0)).unwrap();
    let power = eigenpair(&rc, &g).unwrap();
    rc.eigen.method = EigMethod::Bisection;
    let bis = eigenpair(&rc, &g).unwrap();
    let err = rel(power.lambda, oracle);
    let agree = (power.lambda - bis.lambda).abs() / power.lambda;
    let bound = 2.0 * rc.eigen.config.eig_tol;
    Outcome::new(
        err <= 0.01 && agree <= bound,
        format!(
            "power {:.10} oracle {:.10} rel err {:.2e} (<= 1e-2); |power - bisection|/lambda {:.2e} (<= {:.0e})",
            power.lambda, oracle, err, agree, bound
        ),
    )
}

fn c2() -> Outcome {
    let (_, rc) = load("acc02_eig_interval_alpha_half.cfg");
    let g = grid(&rc);
    let rs = RadialSpec::laplacian_interval(-0.5, 1.0);
    let oracle = shoot_eig_1d(&rs).unwrap();
    let power = eigenpair(&rc, &g).unwrap();
    let err = rel(power.lambda, oracle);
    let literal = p_laplacian_eig_1d(-0.5, 1.0);
    let literal_err = rel(oracle, literal);
    let corrected_err = rel(oracle, closed_form_eig_1d(-0.5, 1.0));
    Outcome::new(
        err <= 0.01 && literal_err <= 1e-6,
        format!(
            "grid {:.8} vs oracle {:.8}: rel {:.2e} (<= 1e-2); oracle vs (pi_p)^p = {:.8}: rel {:.2e} (<= 1e-6); \
             oracle vs (pi_p)^p/(1+alpha): rel {:.2e}",
            power.lambda, oracle, err, literal, literal_err, corrected_err
        ),
    )
}

fn sweep_lambdas(name: &str) -> Vec<(f64, f64)> {
    let (raw, rc) = load(name);
    sweep_points(&raw, &rc)
        .unwrap()
        .into_iter()
        .map(|(_, p)| (p.operator.alpha, eigenpair(&p, &grid(&p)).unwrap().lambda))
        .collect()
}

fn c3() -> Outcome {
    let unit = sweep_lambdas("acc03_scaling_unit.cfg");
    let double = sweep_lambdas("acc03_scaling_double.cfg");
    let mut pass = unit.len() == 3 && unit.len() == double.len();
    let mut parts = Vec::new();
    for (&(alpha, l1), &(alpha2, l2)) in unit.iter().zip(&double) {
        assert_eq!(alpha, alpha2);
        let expected = 2f64.powf(-(2.0 + alpha));
        let err = rel(l2 / l1, expected);
        pass &= err <= 0.01;
        parts.push(format!("alpha {alpha}: ratio {:.8} vs {:.8} rel {:.1e}", l2 / l1, expected, err));
    }
    Outcome::new(pass, parts.join("; "))
}

fn c4() -> Outcome {
    let (_, rc) = load("acc04_eig_disk_laplacian.cfg");
    let oracle = shoot_eig_radial(&RadialSpec::disk(RadialKind::PucciPlus, 1.0, 1.0, 0.0, 1.0)).unwrap();
    let r = eigenpair(&rc, &grid(&rc)).unwrap();
    let err = rel(r.lambda, oracle);
    Outcome::new(err <= 0.02, format!("grid {:.6} oracle {:.6} rel err {:.2e} (<= 2e-2)", r.lambda, oracle, err))
}

fn c5() -> Outcome {
    let plus = sweep_lambdas("acc05_eig_disk_pucci_plus.cfg");
    let minus = sweep_lambdas("acc05_eig_disk_pucci_minus.cfg");
    let mut pass = plus.len() == 2 && minus.len() == 2;
    let mut parts = Vec::new();
    for (&(alpha, lp), &(_, lm)) in plus.iter().zip(&minus) {
        let op = shoot_eig_radial(&RadialSpec::disk(RadialKind::PucciPlus, 1.0, 2.0, alpha, 1.0)).unwrap();
        let om = shoot_eig_radial(&RadialSpec::disk(RadialKind::PucciMinus, 1.0, 2.0, alpha, 1.0)).unwrap();
        let (ep, em) = (rel(lp, op), rel(lm, om));
        let gap = (lp - lm).abs();
        let combined = 0.03 * (op + om);
        pass &= ep <= 0.03 && em <= 0.03 && gap > combined;
        parts.push(format!(
            "alpha {alpha}: plus {lp:.5} (oracle {op:.5}, {ep:.1e}) minus {lm:.5} (oracle {om:.5}, {em:.1e}) gap {gap:.4} > {combined:.4}"
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn c6() -> Outcome {
    let (_, rc) = load("acc06_solve_interval_alpha_half.cfg");
    let g = grid(&rc);
    let mut f = ScalarField::constant(&g, rc.forcing);
    for i in g.boundary_nodes().collect::<Vec<_>>() {
        f.set(i, 0.0);
    }
    let (u, rep) = solve_dirichlet(&rc.operator, &g, &f, rc.lambda, &rc.solve).unwrap();
    let mid = (0..g.len()).find(|&i| (g.coord(i)[0] - 0.5).abs() < 1e-12).unwrap();
    let exact = 1.0 / 96.0;
    let oracle = oracle_dirichlet_1d(&RadialSpec::laplacian_interval(-0.5, 1.0), -1.0).unwrap().value(0.5).unwrap();
    let err = rel(u.get(mid), exact);
    Outcome::new(
        rep.converged && err <= 0.01 && rel(oracle, exact) <= 1e-8,
        format!("u(1/2) {:.8e} vs 1/96 rel {:.2e} (<= 1e-2); shooting oracle {:.12e}", u.get(mid), err, oracle),
    )
}

fn c7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in ["pucci_plus", "pucci_minus", "linear", "qtrace"] {
        let (_, rc) = load(&format!("acc07_comparison_{kind}.cfg"));
        let reports = verify_reports(&rc).unwrap();
        let violations = reports.iter().filter(|r| r.verdict == Verdict::Fail).count();
        let other = reports.iter().filter(|r| r.verdict == Verdict::Inconclusive).count();
        let expected = rc.verify.pairs * rc.verify.resolutions.len();
        let worst = reports.iter().map(|r| r.measured - r.threshold).fold(f64::NEG_INFINITY, f64::max);
        pass &= reports.len() == expected && expected >= 300 && violations == 0 && other == 0;
        parts.push(format!(
            "{kind}: {} pairs at n={:?}, {violations} violations, {other} inconclusive, max(u1-u2-tol) {worst:.2e}",
            reports.len(),
            rc.verify.resolutions
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn c8() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in ["rectangle", "disk", "annulus"] {
        let (_, rc) = load(&format!("acc08_simplicity_{d}.cfg"));
        let reports = verify_reports(&rc).unwrap();
        pass &= all_pass(&reports) && rc.verify.seeds.len() >= 3;
        for r in &reports {
            parts.push(format!(
                "{d}: gap n=65 {:.1e}, n=129 {:.1e} (<= {:.0e}) {}",
                detail(r, "coarse_gap"),
                detail(r, "fine_gap"),
                r.threshold,
                r.verdict.name()
            ));
        }
    }
    Outcome::new(pass, parts.join("; "))
}

fn c9() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in ["square", "disk", "interval"] {
        let (_, rc) = load(&format!("acc09_monotonicity_{d}.cfg"));
        let reports = verify_reports(&rc).unwrap();
        pass &= all_pass(&reports);
        for r in &reports {
            let ratio = detail(r, "ratio");
            let mut line = format!("{d}: gap {:.4} > margin {:.4}, ratio {:.5}", r.measured, r.threshold, ratio);
            if d == "interval" {
                let exact = rc.verify.inner_scale.powf(-(2.0 + rc.operator.alpha));
                let err = rel(ratio, exact);
                pass &= err <= 0.01;
                line.push_str(&format!(" vs exact {exact:.5} rel {err:.1e}"));
            }
            parts.push(line);
        }
    }
    Outcome::new(pass, parts.join("; "))
}

fn c10() -> Outcome {
    let (_, rc) = load("acc10_hopf_distance_disk.cfg");
    let reports = verify_reports(&rc).unwrap();
    let parts: Vec<String> = reports
        .iter()
        .map(|r| match r.check.as_str() {
            "hopf_refinement" => format!(
                "inward quotient {:.3} -> {:.3} {}",
                detail(r, "coarse_quotient"),
                detail(r, "fine_quotient"),
                r.verdict.name()
            ),
            _ => format!(
                "c2/c1 {:.3} -> {:.3}, growth {:.3} (< 2) {}",
                detail(r, "coarse_ratio"),
                detail(r, "fine_ratio"),
                r.measured,
                r.verdict.name()
            ),
        })
        .collect();
    Outcome::new(all_pass(&reports) && reports.len() == 2, parts.join("; "))
}

fn c11() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for d in ["interval", "disk"] {
        let (_, rc) = load(&format!("acc11_isolation_{d}.cfg"));
        let reports = verify_reports(&rc).unwrap();
        pass &= all_pass(&reports) && rc.verify.seeds.len() * 3 >= 6;
        for r in &reports {
            parts.push(format!(
                "{d}: {} runs, lambda_1 {:.5}, min |mu-1| {:.2e} {}",
                detail(r, "runs"),
                detail(r, "lambda1"),
                r.measured,
                r.verdict.name()
            ));
        }
    }
    Outcome::new(pass, parts.join("; "))
}

fn c12() -> Outcome {
    let (_, rc) = load("acc12_holder_disk.cfg");
    let reports = verify_reports(&rc).unwrap();
    let parts: Vec<String> = reports
        .iter()
        .map(|r| format!("n={:?} beta {:.3} residual {:.3} {}", r.n, r.measured, detail(r, "fit_residual"), r.verdict.name()))
        .collect();
    Outcome::new(all_pass(&reports) && reports.len() == 3, parts.join("; "))
}

fn c13() -> Outcome {
    let s2 = std::f64::consts::SQRT_2;
    // (N, R, a, A, |h|, alpha, |g|, L1, L2) and the constant worked out by hand.
    let spots: [([f64; 9], f64); 10] = [
        ([2.0, 1.0, 1.0, 2.0, 0.0, 0.0, 1.0, 2.0, 2.0], 8.0),
        ([2.0, 0.5, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0], 8.0),
        ([2.0, 1.0, 2.0, 3.0, 1.0, 0.0, 0.0, 1.0, 1.0], 7.0),
        ([1.0, 1.0, 1.0, 1.0, 3.0, 0.0, 0.0, 1.0, 1.0], 6.0),
        ([2.0, 0.25, 1.0, 2.0, 0.0, -0.5, 1.0, 1.0, 4.0], 32.0 * s2),
        ([2.0, 1.0, 0.5, 1.0, 0.0, -0.5, 2.0, 1.0, 1.0], 64.0 * s2),
        ([3.0, 2.0, 1.0, 1.5, 0.5, -0.25, 0.0, 1.0, 1.0], 7.0),
        ([2.0, 1.0, 1.0, 1.0, 0.0, -0.75, 10.0, 0.5, 2.0], 640.0 * s2),
        ([1.0, 1.0, 2.0, 2.0, 0.0, 0.0, 4.0, 1.0, 1.0], 32.0),
        ([2.0, 0.1, 1.0, 4.0, 2.0, -0.5, 0.5, 0.25, 1.0], 164.0),
    ];
    let mut worst: f64 = 0.0;
    for (x, hand) in spots {
        let c = barrier_constant(x[0] as usize, x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8]).unwrap();
        worst = worst.max(rel(c, hand));
    }
    let (_, rc) = load("acc13_barrier.cfg");
    let reports = verify_reports(&rc).unwrap();
    let radii: Vec<String> = reports.iter().map(|r| format!("{} {}", r.case, r.verdict.name())).collect();
    Outcome::new(
        worst <= 1e-15 && all_pass(&reports) && reports.len() == 3,
        format!("10 spot values, max rel diff {worst:.1e} (<= 1e-15); supersolution at threshold: {}", radii.join(", ")),
    )
}

/// (id, description, runtime bound in seconds, check)
type Criterion = (u32, &'static str, Option<f64>, fn() -> Outcome);

const CRITERIA: &[Criterion] = &[
    (1, "1D eigenvalue, alpha=0, n=256", Some(10.0), c1),
    (2, "1D eigenvalue, alpha=-1/2, n=256", Some(30.0), c2),
    (3, "scaling law 2^-(2+alpha)", Some(60.0), c3),
    (4, "disk Laplacian, n=129", Some(120.0), c4),
    (5, "disk Pucci plus/minus, a=1 A=2", Some(300.0), c5),
    (6, "Dirichlet u(1/2)=1/96, alpha=-1/2", Some(10.0), c6),
    (7, "comparison, 100 pairs x 3 resolutions per kind", None, c7),
    (8, "simplicity on rectangle, disk, annulus", Some(600.0), c8),
    (9, "strict domain monotonicity", None, c9),
    (10, "Hopf quotient and distance comparability", None, c10),
    (11, "isolation scan, interval and disk", Some(600.0), c11),
    (12, "gradient Hoelder exponent, disk, alpha=-1/2", None, c12),
    (13, "barrier constant and supersolution", None, c13),
];

fn main() -> ExitCode {
    // Ignore libtest flags such as `--nocapture` or a name filter.
    let only: Option<Vec<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    let mut failed = 0;
    let mut ran = 0;
    for &(id, name, limit, check) in CRITERIA {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let out = check();
        let secs = t.elapsed().as_secs_f64();
        let in_time = limit.is_none_or(|l| secs < l);
        let pass = out.pass && in_time;
        let budget = limit.map_or(String::new(), |l| format!(" (< {l:.0} s)"));
        println!(
            "criterion {id:>2} {} | {name} | {:.2} s{budget} | {}",
            if pass { "PASS" } else { "FAIL" },
            secs,
            out.detail
        );
        if !pass {
            failed += 1;
            if !KNOWN_CONFLICTS.contains(&id) {
                unexpected.push(id);
            }
        }
    }
    println!("acceptance: {} of {ran} criteria pass", ran - failed);
    if unexpected.is_empty() {
        if failed > 0 {
            println!("failures are documented conflicts: {KNOWN_CONFLICTS:?}");
        }
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
