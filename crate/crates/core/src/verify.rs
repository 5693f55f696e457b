//! Executable checks of the qualitative theory on computed solutions:
//! comparison, simplicity, Hopf behaviour, comparability with the distance
//! function, strict domain monotonicity, isolation of the principal
//! half-eigenvalues, Hölder regularity and the exponential barrier.
//!
//! Strict inequalities are tested with explicit margins. A strict
//! inequality that holds only within its margin is reported as
//! inconclusive, never as a pass.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dirichlet::{solve_dirichlet, SolveConfig, Solver};
use crate::eigen::{initial_field, power_iterate, EigConfig, EigResult};
use crate::error::{Error, Result};
use crate::grid::{build_domain, distance_field, DomainSpec, Grid, ScalarField};
use crate::math;
use crate::operators::{pucci_eval, OperatorSpec, PucciSign, SymMat2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check: String,
    pub case: String,
    /// Grid resolutions involved.
    pub n: Vec<usize>,
    pub measured: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Offending node and value on failure.
    pub witness: Option<(usize, f64)>,
    /// Further measured quantities as `key=value` pairs.
    pub details: Vec<(String, f64)>,
}

impl CheckReport {
    fn new(check: &str, case: String, n: Vec<usize>, measured: f64, threshold: f64, verdict: Verdict) -> Self {
        CheckReport { check: check.into(), case, n, measured, threshold, verdict, witness: None, details: Vec::new() }
    }

    fn detail(mut self, key: &str, v: f64) -> Self {
        self.details.push((key.into(), v));
        self
    }

    fn witness(mut self, node: usize, v: f64) -> Self {
        self.witness = Some((node, v));
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn case_name(spec: &OperatorSpec, g: &Grid) -> String {
    format!("{}/{}/alpha={}", spec.kind.name(), g.shape().name(), spec.alpha)
}

fn inconclusive(check: &str, case: String, n: Vec<usize>, err: &Error) -> CheckReport {
    let mut r = CheckReport::new(check, case, n, f64::NAN, f64::NAN, Verdict::Inconclusive);
    r.details.push((format!("error: {err}"), f64::NAN));
    r
}

/// The rate of the exponential barrier:
/// `max(2 (2A(N-1)/R + |h|) / a, 2^(4-alpha) |g| / (a L1 L2^alpha))`.
#[allow(clippy::too_many_arguments)]
pub fn barrier_constant(n: usize, r: f64, a: f64, big_a: f64, h_inf: f64, alpha: f64, g_inf: f64, l1: f64, l2: f64) -> Result<f64> {
    if n == 0 || !(r > 0.0 && a > 0.0 && big_a >= a && h_inf >= 0.0 && g_inf >= 0.0 && l1 > 0.0 && l1 <= l2) {
        return Err(Error::InvalidConfig("barrier_constant needs positive inputs with a <= A and L1 <= L2".into()));
    }
    if !(alpha > -1.0 && alpha <= 0.0) {
        return Err(Error::InvalidConfig("alpha must lie in (-1, 0]".into()));
    }
    let first = 2.0 * (2.0 * big_a * (n as f64 - 1.0) / r + h_inf) / a;
    let second = math::pow(2.0, 4.0 - alpha) * g_inf / (a * l1 * math::pow(l2, alpha));
    Ok(first.max(second))
}

/// `w = delta (exp(-c|x - x0|) - exp(-3cR/2))` on the annulus
/// `R/2 < |x - x0| < 3R/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub l1: f64,
    pub l2: f64,
    pub g_inf: f64,
    pub dimension: usize,
}

impl BarrierSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.amplitude >= 0.0 && self.rate > 0.0 && self.l1 > 0.0 && self.l1 <= self.l2) {
            return Err(Error::InvalidConfig("barrier needs R > 0, amplitude >= 0, rate > 0, 0 < L1 <= L2".into()));
        }
        if self.dimension == 0 || self.dimension > 2 {
            return Err(Error::InvalidConfig("barrier dimension must be 1 or 2".into()));
        }
        Ok(())
    }

    /// Whether the amplitude satisfies the smallness condition
    /// `delta < R L1 e / 16`.
    pub fn small_enough(&self) -> bool {
        self.amplitude < self.radius * self.l1 * core::f64::consts::E / 16.0
    }

    pub fn value(&self, r: f64) -> f64 {
        self.amplitude * (math::exp(-self.rate * r) - math::exp(-1.5 * self.rate * self.radius))
    }
}

/// Evaluates `M-(D^2 w) - |h| |Dw| - (a c^2 / 2) delta exp(-c r)` with exact
/// derivatives at the nodes of an `n x n` lattice covering the annulus and
/// passes iff it is non-negative (up to rounding) at every node with
/// `R/2 < r < 3R/2`.
pub fn check_barrier_supersolution(bs: &BarrierSpec, spec: &OperatorSpec, n: usize) -> Result<CheckReport> {
    bs.validate()?;
    spec.validate()?;
    if n < 4 {
        return Err(Error::InvalidConfig("barrier lattice needs n >= 4".into()));
    }
    let (a, big_a, hs) = (spec.a_min, spec.a_max, spec.drift_sup());
    let (c, dl) = (bs.rate, bs.amplitude);
    let outer = 1.5 * bs.radius;
    let step = 2.0 * outer / n as f64;
    let mut worst = f64::INFINITY;
    let mut witness = (0usize, 0.0);
    let mut count = 0usize;
    let ny = if bs.dimension == 1 { 1 } else { n + 1 };
    for j in 0..ny {
        for i in 0..=n {
            let x = [-outer + i as f64 * step, if bs.dimension == 1 { 0.0 } else { -outer + j as f64 * step }];
            let r = math::hypot(x[0], x[1]);
            if !(r > 0.5 * bs.radius && r < outer) {
                continue;
            }
            count += 1;
            let e = math::exp(-c * r);
            let (w1, w2) = (-c * dl * e, c * c * dl * e);
            // Hessian of a radial profile: w'' along x/r, w'/r across.
            let (ux, uy) = (x[0] / r, x[1] / r);
            let m = if bs.dimension == 1 {
                SymMat2::new(w2, 0.0, 0.0)
            } else {
                let t = w1 / r;
                SymMat2::new(w2 * ux * ux + t * uy * uy, (w2 - t) * ux * uy, w2 * uy * uy + t * ux * ux)
            };
            let lhs = pucci_eval(&m, a, big_a, PucciSign::Minus) - hs * math::abs(w1);
            let rhs = 0.5 * a * c * c * dl * e;
            let slack = lhs - rhs;
            let scale = 1e-12 * (math::abs(lhs) + math::abs(rhs));
            let rel = if rhs > 0.0 { slack / rhs } else { slack };
            let normalized = if slack + scale >= 0.0 { rel.max(0.0) } else { rel };
            if normalized < worst {
                worst = normalized;
                witness = (j * (n + 1) + i, slack);
            }
        }
    }
    let worst = if worst.is_finite() { worst } else { 0.0 };
    let verdict = if worst < 0.0 { Verdict::Fail } else { Verdict::Pass };
    let case = format!("R={}/c={}/delta={}", bs.radius, bs.rate, bs.amplitude);
    let mut rep = CheckReport::new("barrier_supersolution", case, vec![n], worst, 0.0, verdict)
        .detail("nodes", count as f64)
        .detail("small_amplitude", if bs.small_enough() { 1.0 } else { 0.0 });
    if verdict == Verdict::Fail {
        rep = rep.witness(witness.0, witness.1);
    }
    Ok(rep)
}

/// Smooth random forcing pair with `f2 < f1 <= 0`, separated by at least
/// `margin`.
pub fn random_forcing_pair(g: &Grid, seed: u64, margin: f64) -> (ScalarField, ScalarField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = g.bounds();
    let width = 0.25 * g.diameter();
    let bumps = |rng: &mut ChaCha8Rng| -> Vec<([f64; 2], f64)> {
        (0..3)
            .map(|_| {
                let c = [rng.gen_range(b[0]..=b[1]), rng.gen_range(b[2]..=b[3])];
                (c, rng.gen_range(0.0..1.0))
            })
            .collect()
    };
    let base = rng.gen_range(0.2..1.0);
    let b1 = bumps(&mut rng);
    let b2 = bumps(&mut rng);
    let eval = |bs: &[([f64; 2], f64)], x: [f64; 2]| -> f64 {
        bs.iter()
            .map(|(c, a)| {
                let r2 = (x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1]);
                a * math::exp(-r2 / (2.0 * width * width))
            })
            .sum()
    };
    let f1 = ScalarField::from_fn(g, |x| -base * eval(&b1, x));
    let f2 = ScalarField::from_fn(g, |x| -base * eval(&b1, x) - margin - eval(&b2, x));
    (f1, f2)
}

/// Solves with forcings `f1` and `f2 < f1` and passes iff `u1 <= u2 + tol`.
/// Requires `c + lambda <= 0`.
pub fn check_comparison(
    spec: &OperatorSpec,
    g: &Grid,
    f1: &ScalarField,
    f2: &ScalarField,
    lambda: f64,
    cfg: &SolveConfig,
) -> Result<CheckReport> {
    if spec.zeroth_max() + lambda > 0.0 {
        return Err(Error::InvalidConfig("comparison requires c + lambda <= 0".into()));
    }
    let case = case_name(spec, g);
    let n = vec![resolution(g)];
    for &i in g.interior() {
        if !(f2.get(i) <= f1.get(i)) {
            return Err(Error::InvalidConfig(format!("comparison requires f2 <= f1 (node {i})")));
        }
    }
    let (u1, u2) = match (solve_dirichlet(spec, g, f1, lambda, cfg), solve_dirichlet(spec, g, f2, lambda, cfg)) {
        (Ok((u1, r1)), Ok((u2, r2))) if r1.converged && r2.converged => (u1, u2),
        (Err(e), _) | (_, Err(e)) => return Ok(inconclusive("comparison", case, n, &e)),
        _ => return Ok(inconclusive("comparison", case, n, &Error::Stagnation { iterations: 0, residual: f64::NAN })),
    };
    let scale = u1.sup_norm().max(u2.sup_norm()).max(1e-300);
    let threshold = comparison_tolerance(cfg, g, spec, scale);
    let mut worst = f64::NEG_INFINITY;
    let mut node = 0;
    for &i in g.interior() {
        let d = u1.get(i) - u2.get(i);
        if d > worst {
            worst = d;
            node = i;
        }
    }
    let verdict = if worst <= threshold { Verdict::Pass } else { Verdict::Fail };
    let mut rep = CheckReport::new("comparison", case, n, worst, threshold, verdict).detail("scale", scale);
    if verdict == Verdict::Fail {
        rep = rep.witness(node, worst);
    }
    Ok(rep)
}

/// Solution error allowed by the residual tolerance: `tol` times the
/// one-dimensional barrier constant `d^2 / (8a)`, plus relative rounding.
fn comparison_tolerance(cfg: &SolveConfig, g: &Grid, spec: &OperatorSpec, scale: f64) -> f64 {
    let d = g.diameter();
    10.0 * cfg.tol * d * d / (8.0 * spec.a_min) + 1e-10 * scale
}

/// Largest pairwise sup-norm distance between normalized eigenfunctions.
fn max_pairwise(phis: &[ScalarField]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..phis.len() {
        for j in i + 1..phis.len() {
            m = m.max(phis[i].max_abs_diff(&phis[j]));
        }
    }
    m
}

/// Runs the power iteration from every seed and passes iff all normalized
/// eigenfunctions agree to `tol`. Requires `c + lambda+ > 0`.
pub fn check_simplicity(spec: &OperatorSpec, g: &Grid, cfg: &EigConfig, seeds: &[u64], tol: f64) -> Result<CheckReport> {
    let case = case_name(spec, g);
    let n = vec![resolution(g)];
    if seeds.len() < 2 {
        return Err(Error::InsufficientData("simplicity needs at least two seeds".into()));
    }
    if g.boundary_components() > 2 {
        return Ok(CheckReport::new("simplicity", case, n, f64::NAN, tol, Verdict::Inconclusive)
            .detail("boundary_components", g.boundary_components() as f64));
    }
    let mut runs: Vec<EigResult> = Vec::new();
    for &s in seeds {
        match power_iterate(spec, g, cfg, s) {
            Ok(r) => runs.push(r),
            Err(e) => return Ok(inconclusive("simplicity", case, n, &e)),
        }
    }
    if runs.iter().any(|r| !r.proper_shift) {
        return Ok(CheckReport::new("simplicity", case, n, f64::NAN, tol, Verdict::Inconclusive).detail("c_plus_lambda_positive", 0.0));
    }
    let phis: Vec<ScalarField> = runs.iter().map(|r| r.phi.clone()).collect();
    let gap = max_pairwise(&phis);
    let spread = runs.iter().map(|r| r.lambda).fold(f64::NEG_INFINITY, f64::max)
        - runs.iter().map(|r| r.lambda).fold(f64::INFINITY, f64::min);
    let verdict = if gap <= tol { Verdict::Pass } else { Verdict::Fail };
    Ok(CheckReport::new("simplicity", case, n, gap, tol, verdict)
        .detail("lambda", runs[0].lambda)
        .detail("lambda_spread", spread)
        .detail("seeds", seeds.len() as f64))
}

/// Simplicity on a coarse and a fine grid; passes iff both pass and the
/// fine gap does not exceed the coarse gap (or lies below `noise`).
pub fn check_simplicity_refinement(
    spec: &OperatorSpec,
    coarse: &Grid,
    fine: &Grid,
    cfg: &EigConfig,
    seeds: &[u64],
    tol: f64,
    noise: f64,
) -> Result<CheckReport> {
    let c = check_simplicity(spec, coarse, cfg, seeds, tol)?;
    let f = check_simplicity(spec, fine, cfg, seeds, tol)?;
    let case = case_name(spec, fine);
    let n = vec![resolution(coarse), resolution(fine)];
    if c.verdict == Verdict::Inconclusive || f.verdict == Verdict::Inconclusive {
        return Ok(CheckReport::new("simplicity_refinement", case, n, f.measured, tol, Verdict::Inconclusive));
    }
    let ok = c.passed() && f.passed() && (f.measured <= c.measured || f.measured <= noise);
    Ok(CheckReport::new("simplicity_refinement", case, n, f.measured, tol, if ok { Verdict::Pass } else { Verdict::Fail })
        .detail("coarse_gap", c.measured)
        .detail("fine_gap", f.measured)
        .detail("noise_floor", noise))
}

fn resolution(g: &Grid) -> usize {
    let span = if g.dimension() == 1 { g.nx() - 1 } else { (g.nx() - 1).max(g.ny() - 1) };
    match g.shape().name() {
        "disk" | "annulus" => span - 2,
        _ => span,
    }
}

/// Minimum over boundary nodes of the inward quotient
/// `max_j (phi_j - phi_b) / d_j` over interior neighbours `j`, with `d`
/// the distance to the boundary. Returns the value and the node.
pub fn inward_quotient(g: &Grid, phi: &ScalarField) -> (f64, usize) {
    let d = distance_field(g);
    let mut worst = f64::INFINITY;
    let mut node = 0;
    for b in g.boundary_nodes() {
        let mut best = f64::NEG_INFINITY;
        for j in g.neighbourhood(b) {
            if g.is_interior(j) && d.get(j) > 0.0 {
                best = best.max((phi.get(j) - phi.get(b)) / d.get(j));
            }
        }
        if best.is_finite() && best < worst {
            worst = best;
            node = b;
        }
    }
    (worst, node)
}

/// Hopf behaviour of a positive eigenfunction: inward boundary quotients
/// at least `threshold > 0`, and no interior node strictly below all its
/// neighbours. A constant field is flagged as degenerate.
pub fn check_hopf(g: &Grid, phi: &ScalarField, threshold: f64) -> Result<CheckReport> {
    phi.check(g)?;
    let case = g.shape().name().to_string();
    let n = vec![resolution(g)];
    if phi.max() - phi.min() == 0.0 {
        return Ok(CheckReport::new("hopf", case, n, 0.0, threshold, Verdict::Fail).detail("degenerate", 1.0));
    }
    let (q, qnode) = inward_quotient(g, phi);
    for &i in g.interior() {
        let v = phi.get(i);
        if g.neighbourhood(i).all(|j| phi.get(j) > v) {
            return Ok(CheckReport::new("hopf", case, n, q, threshold, Verdict::Fail)
                .detail("interior_minimum", 1.0)
                .witness(i, v));
        }
    }
    let verdict = if q >= threshold && q > 0.0 { Verdict::Pass } else { Verdict::Fail };
    let mut rep = CheckReport::new("hopf", case, n, q, threshold, verdict);
    if verdict == Verdict::Fail {
        rep = rep.witness(qnode, q);
    }
    Ok(rep)
}

/// Hopf on two resolutions: both pass and the fine minimum quotient is at
/// least half the coarse one.
pub fn check_hopf_refinement(coarse: (&Grid, &ScalarField), fine: (&Grid, &ScalarField), threshold: f64) -> Result<CheckReport> {
    let c = check_hopf(coarse.0, coarse.1, threshold)?;
    let f = check_hopf(fine.0, fine.1, threshold)?;
    let ratio = f.measured / c.measured;
    let ok = c.passed() && f.passed() && ratio >= 0.5;
    Ok(CheckReport::new(
        "hopf_refinement",
        fine.0.shape().name().to_string(),
        vec![resolution(coarse.0), resolution(fine.0)],
        ratio,
        0.5,
        if ok { Verdict::Pass } else { Verdict::Fail },
    )
    .detail("coarse_quotient", c.measured)
    .detail("fine_quotient", f.measured))
}

/// `c1 = min phi/d`, `c2 = max phi/d` over interior nodes.
pub fn distance_ratios(g: &Grid, phi: &ScalarField, d: &ScalarField) -> Result<(f64, f64)> {
    phi.check(g)?;
    d.check(g)?;
    let (mut c1, mut c2) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in g.interior() {
        if d.get(i) <= 0.0 {
            continue;
        }
        let r = phi.get(i) / d.get(i);
        c1 = c1.min(r);
        c2 = c2.max(r);
    }
    Ok((c1, c2))
}

/// Passes iff `0 < c1 <= c2 < inf` for the ratios of [`distance_ratios`].
pub fn check_distance_comparability(g: &Grid, phi: &ScalarField, d: &ScalarField) -> Result<CheckReport> {
    let (c1, c2) = distance_ratios(g, phi, d)?;
    let ok = c1 > 0.0 && c1 <= c2 && c2.is_finite();
    Ok(CheckReport::new(
        "distance_comparability",
        g.shape().name().to_string(),
        vec![resolution(g)],
        c2 / c1,
        f64::INFINITY,
        if ok { Verdict::Pass } else { Verdict::Fail },
    )
    .detail("c1", c1)
    .detail("c2", c2))
}

/// Comparability on two resolutions; passes iff both pass and `c2/c1`
/// grows by less than a factor 2.
pub fn check_distance_refinement(coarse: (&Grid, &ScalarField), fine: (&Grid, &ScalarField)) -> Result<CheckReport> {
    let c = check_distance_comparability(coarse.0, coarse.1, &distance_field(coarse.0))?;
    let f = check_distance_comparability(fine.0, fine.1, &distance_field(fine.0))?;
    let growth = f.measured / c.measured;
    let ok = c.passed() && f.passed() && growth < 2.0;
    Ok(CheckReport::new(
        "distance_refinement",
        fine.0.shape().name().to_string(),
        vec![resolution(coarse.0), resolution(fine.0)],
        growth,
        2.0,
        if ok { Verdict::Pass } else { Verdict::Fail },
    )
    .detail("coarse_ratio", c.measured)
    .detail("fine_ratio", f.measured))
}

/// Nearest lattice node of `g` to `p`, if `p` lies within the lattice.
fn nearest_node(g: &Grid, p: [f64; 2]) -> Option<usize> {
    let o = g.origin();
    let fx = math::round((p[0] - o[0]) / g.h());
    let fy = if g.dimension() == 1 { 0.0 } else { math::round((p[1] - o[1]) / g.h()) };
    if fx < 0.0 || fy < 0.0 || fx as usize >= g.nx() || fy as usize >= g.ny() {
        return None;
    }
    Some(fy as usize * g.nx() + fx as usize)
}

/// Strict monotonicity of `lambda+` under domain inclusion. `inner` must
/// lie inside `outer` with a margin of two mesh widths. Each domain uses
/// resolution `n` scaled by its size so that the mesh widths match. The
/// gap must exceed `rel_tol * (lambda_in + lambda_out)` plus the eigen
/// tolerances; otherwise the result is inconclusive.
pub fn check_domain_monotonicity(
    spec: &OperatorSpec,
    outer: &DomainSpec,
    inner: &DomainSpec,
    n: usize,
    cfg: &EigConfig,
    rel_tol: f64,
) -> Result<CheckReport> {
    let go = build_domain(outer, n)?;
    let probe = build_domain(inner, n)?;
    let n_in = math::round(n as f64 * probe.h() / go.h()).max(4.0) as usize;
    let gi = build_domain(inner, n_in)?;
    let dout = distance_field(&go);
    for i in 0..gi.len() {
        if gi.class(i) == crate::grid::NodeClass::Exterior {
            continue;
        }
        let ok = nearest_node(&go, gi.coord(i)).is_some_and(|j| go.is_interior(j) && dout.get(j) >= 2.0 * go.h());
        if !ok {
            return Err(Error::InvalidDomain(format!("inner domain is not inside the outer one with a 2h margin (node {i})")));
        }
    }
    let case = format!("{}/{}/{}", spec.kind.name(), outer.shape.name(), inner.shape.name());
    let ns = vec![n, n_in];
    let (ro, ri) = match (power_iterate(spec, &go, cfg, 0), power_iterate(spec, &gi, cfg, 0)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Ok(inconclusive("domain_monotonicity", case, ns, &e)),
    };
    let eig_unc = |r: &EigResult| (r.cw_upper - r.cw_lower).max(cfg.eig_tol * math::abs(r.lambda));
    let margin = rel_tol * (ri.lambda + ro.lambda) + eig_unc(&ri) + eig_unc(&ro);
    let gap = ri.lambda - ro.lambda;
    let verdict = if gap > margin {
        Verdict::Pass
    } else if gap < -margin {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(CheckReport::new("domain_monotonicity", case, ns, gap, margin, verdict)
        .detail("lambda_outer", ro.lambda)
        .detail("lambda_inner", ri.lambda)
        .detail("ratio", ri.lambda / ro.lambda))
}

/// Outcome of one fixed-`lambda` run of the isolation scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanOutcome {
    Decays,
    Diverges,
    /// Converged shape with growth factor one: a nontrivial solution.
    Nontrivial { constant_sign: bool },
    Undecided,
}

/// Seeded start fields: for every seed a positive, a negative and a
/// sign-changing field built from bump-modulated distance profiles.
pub fn scan_starts(g: &Grid, seeds: &[u64]) -> Vec<(String, ScalarField)> {
    let mut out = Vec::new();
    let b = g.bounds();
    let mid = [0.5 * (b[0] + b[1]), 0.5 * (b[2] + b[3])];
    for &s in seeds {
        let pos = initial_field(g, s);
        let neg = pos.scaled(-1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x5eed);
        let angle: f64 = rng.gen_range(0.0..core::f64::consts::PI);
        let (ca, sa) = (math::cos(angle), math::sin(angle));
        let product = g.dimension() == 2 && s % 2 == 1;
        let mut mixed = pos.clone();
        for &i in g.interior() {
            let x = g.coord(i);
            let (dx, dy) = (x[0] - mid[0], x[1] - mid[1]);
            let t = if product { (ca * dx + sa * dy) * (-sa * dx + ca * dy) } else { ca * dx + sa * dy };
            mixed.set(i, pos.get(i) * t);
        }
        mixed.normalize();
        out.push((format!("positive/{s}"), pos));
        out.push((format!("negative/{s}"), neg));
        out.push((format!("sign_changing/{s}"), mixed));
    }
    out
}

/// Runs `u <- T(u) / |T(u)|` where `T(u)` solves
/// `F~_h[v] + h.Dv = -(c + lambda) D(u) W(u) u`. `T` is positively
/// homogeneous of degree one, so the growth factor `mu = |T(u)|` decides
/// between decay (`mu < 1`), blow-up (`mu > 1`) and a nontrivial solution
/// of `F_h[u] + (c + lambda)|u|^alpha u = 0` (`mu = 1`).
pub fn scan_run(spec: &OperatorSpec, g: &Grid, lambda: f64, start: &ScalarField, cfg: &EigConfig, max_iter: usize) -> Result<(ScanOutcome, f64)> {
    let delta = crate::eigen::eig_delta(&cfg.solve, g, spec.alpha);
    let mut solver = Solver::new(spec, g, &cfg.solve)?;
    let zero = vec![0.0; g.len()];
    let mut u = start.clone();
    for i in g.boundary_nodes() {
        u.set(i, 0.0);
    }
    if u.normalize() == 0.0 {
        return Ok((ScanOutcome::Decays, 0.0));
    }
    let mut rhs = vec![0.0; g.len()];
    let mut v = vec![0.0; g.len()];
    let mut mu = f64::NAN;
    let mut prev_mu = f64::NAN;
    for _ in 0..max_iter {
        let uv = u.values();
        for &i in g.interior() {
            let d = crate::dirichlet::amplitude_weight(spec.alpha, uv[i], delta);
            rhs[i] = -(spec.zeroth_at(i) + lambda) * d * uv[i];
        }
        v.iter_mut().for_each(|x| *x = 0.0);
        solver.step(uv, &rhs, &zero, delta, &mut v)?;
        mu = g.interior().iter().fold(0.0f64, |m, &i| m.max(math::abs(v[i])));
        if mu == 0.0 || mu < 1e-12 {
            return Ok((ScanOutcome::Decays, mu));
        }
        let mut change: f64 = 0.0;
        let um = u.clone();
        for &i in g.interior() {
            let nv = v[i] / mu;
            change = change.max(math::abs(nv - um.get(i)));
            u.set(i, nv);
        }
        let settled = change < 1e-9 && math::abs(mu - prev_mu) < 1e-9 * mu;
        prev_mu = mu;
        if settled {
            break;
        }
    }
    let tol_mu = 1e-6;
    let outcome = if !mu.is_finite() {
        ScanOutcome::Diverges
    } else if math::abs(mu - 1.0) <= tol_mu {
        let (mut pos, mut neg) = (false, false);
        let scale = u.sup_norm();
        for &i in g.interior() {
            pos |= u.get(i) > 1e-6 * scale;
            neg |= u.get(i) < -1e-6 * scale;
        }
        ScanOutcome::Nontrivial { constant_sign: !(pos && neg) }
    } else if mu < 1.0 {
        ScanOutcome::Decays
    } else {
        ScanOutcome::Diverges
    };
    Ok((outcome, mu))
}

/// Isolation of the principal half-eigenvalues. For every `lambda` in
/// `lambdas` strictly above `lambda1`, no start may settle on a nontrivial
/// constant-sign solution; at `lambda = lambda_plus` no start may settle
/// on a sign-changing nontrivial solution.
#[allow(clippy::too_many_arguments)]
pub fn isolation_scan(
    spec: &OperatorSpec,
    g: &Grid,
    lambda1: f64,
    lambda_plus: f64,
    cfg: &EigConfig,
    lambdas: &[f64],
    seeds: &[u64],
    max_iter: usize,
) -> Result<CheckReport> {
    let case = case_name(spec, g);
    let starts = scan_starts(g, seeds);
    let mut runs = 0usize;
    let mut worst_mu_gap = f64::INFINITY;
    let mut trial: Vec<f64> = lambdas.iter().copied().filter(|&l| l > lambda1).collect();
    trial.push(lambda_plus);
    for &lam in &trial {
        for (label, st) in &starts {
            let (outcome, mu) = match scan_run(spec, g, lam, st, cfg, max_iter) {
                Ok(o) => o,
                Err(e) => return Ok(inconclusive("isolation", case, vec![resolution(g)], &e)),
            };
            runs += 1;
            let at_plus = lam == lambda_plus;
            if !at_plus {
                worst_mu_gap = worst_mu_gap.min(math::abs(mu - 1.0));
            }
            let bad = match outcome {
                ScanOutcome::Nontrivial { constant_sign } => (constant_sign && !at_plus) || (!constant_sign && at_plus),
                _ => false,
            };
            if bad {
                let mut r = CheckReport::new("isolation", case, vec![resolution(g)], mu, 1.0, Verdict::Fail)
                    .detail("lambda", lam);
                r.details.push((format!("start={label}"), 0.0));
                return Ok(r);
            }
        }
    }
    Ok(CheckReport::new("isolation", case, vec![resolution(g)], worst_mu_gap, 0.0, Verdict::Pass)
        .detail("runs", runs as f64)
        .detail("lambda1", lambda1))
}

/// Log-log fit of an oscillation profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderFit {
    pub exponent: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub residual: f64,
    pub scales: usize,
}

fn fit_loglog(points: &[(f64, f64)]) -> Result<HolderFit> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|&(s, o)| (math::ln(s), math::ln(o))).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable scales, need 3", pts.len())));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| {
        let e = p.1 - (my + slope * (p.0 - mx));
        e * e
    }).sum();
    Ok(HolderFit { exponent: slope, residual: math::sqrt(rss / m), scales: pts.len() })
}

/// Hölder exponents `(beta, gamma)` of the discrete gradient and of `u`
/// from oscillations over dyadic lattice separations `2^k h`, `k >= 1`, up
/// to a quarter of the diameter. Gradients are taken at nodes at least
/// `8h` from the boundary: a staircase boundary perturbs the discrete
/// gradient by O(1) in a layer a few mesh widths thick.
pub fn estimate_holder(u: &ScalarField, g: &Grid) -> Result<(HolderFit, HolderFit)> {
    estimate_holder_band(u, g, HOLDER_BAND * g.h())
}

/// Default boundary band of [`estimate_holder`] in mesh widths.
pub const HOLDER_BAND: f64 = 8.0;

/// [`estimate_holder`] with an explicit band width.
pub fn estimate_holder_band(u: &ScalarField, g: &Grid, band: f64) -> Result<(HolderFit, HolderFit)> {
    u.check(g)?;
    let h = g.h();
    let d = distance_field(g);
    let v = u.values();
    let grad = |i: usize| -> Option<[f64; 2]> {
        if !g.is_interior(i) || d.get(i) < band {
            return None;
        }
        let gx = (v[i + 1] - v[i - 1]) / (2.0 * h);
        let gy = if g.dimension() == 1 { 0.0 } else { (v[i + g.nx()] - v[i - g.nx()]) / (2.0 * h) };
        Some([gx, gy])
    };
    let dirs: &[(isize, isize)] = if g.dimension() == 1 { &[(1, 0)] } else { &[(1, 0), (0, 1)] };
    let mut osc_u = Vec::new();
    let mut osc_g = Vec::new();
    let mut k = 1usize;
    loop {
        let step = 1isize << k;
        let s = step as f64 * h;
        if s > 0.25 * g.diameter() {
            break;
        }
        let (mut mu, mut mg) = (0.0f64, 0.0f64);
        for i in 0..g.len() {
            if v[i].is_nan() {
                continue;
            }
            for &(dx, dy) in dirs {
                let Some(j) = g.neighbor(i, dx * step, dy * step) else { continue };
                if v[j].is_nan() {
                    continue;
                }
                mu = mu.max(math::abs(v[j] - v[i]));
                if let (Some(a), Some(b)) = (grad(i), grad(j)) {
                    mg = mg.max(math::hypot(a[0] - b[0], a[1] - b[1]));
                }
            }
        }
        osc_u.push((s, mu));
        osc_g.push((s, mg));
        k += 1;
    }
    Ok((fit_loglog(&osc_g)?, fit_loglog(&osc_u)?))
}

/// Weak form of nonexistence at the principal eigenvalue for `f >= 0`:
/// solving `F_h[u] + (c + lambda)|u|^alpha u = 1` just below `lambda+`
/// must not produce a converged solution that is positive somewhere.
pub fn check_no_positive_solution(spec: &OperatorSpec, g: &Grid, lambda: f64, cfg: &SolveConfig) -> Result<CheckReport> {
    let f = ScalarField::from_fn(g, |_| 1.0);
    let mut f = f;
    for i in g.boundary_nodes() {
        f.set(i, 0.0);
    }
    let case = case_name(spec, g);
    match solve_dirichlet(spec, g, &f, lambda, cfg) {
        Ok((u, rep)) if rep.converged => {
            let mx = g.interior().iter().fold(f64::NEG_INFINITY, |m, &i| m.max(u.get(i)));
            let verdict = if mx > 0.0 { Verdict::Fail } else { Verdict::Pass };
            Ok(CheckReport::new("no_positive_solution", case, vec![resolution(g)], mx, 0.0, verdict).detail("converged", 1.0))
        }
        Ok(_) | Err(_) => Ok(CheckReport::new("no_positive_solution", case, vec![resolution(g)], f64::NAN, 0.0, Verdict::Pass)
            .detail("converged", 0.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrier_constant_spot_values() {
        assert_eq!(barrier_constant(2, 1.0, 1.0, 2.0, 0.0, 0.0, 1.0, 2.0, 2.0).unwrap(), 8.0);
        let first = barrier_constant(2, 1.0, 1.0, 2.0, 0.0, -0.5, 1e-300, 1.0, 1.0).unwrap();
        assert_eq!(first, 2.0 * 2.0 * 2.0 * 1.0 / 1.0);
        let a = barrier_constant(3, 0.5, 1.0, 3.0, 1.0, -0.3, 0.1, 1.0, 2.0).unwrap();
        let b = barrier_constant(3, 0.5, 1.0, 3.0, 1.0, -0.3, 0.2, 1.0, 2.0).unwrap();
        assert_eq!(a, b);
        assert!(barrier_constant(2, 1.0, 1.0, 2.0, 0.0, 0.0, 1.0, 3.0, 2.0).is_err());
    }

    #[test]
    fn barrier_supersolution_at_threshold() {
        let spec = OperatorSpec::pucci_minus(1.0, 2.0, 0.0);
        for r in [0.25, 0.5, 1.0] {
            let c = barrier_constant(2, r, 1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 1.0).unwrap();
            let bs = BarrierSpec { center: [0.0, 0.0], radius: r, amplitude: 0.01, rate: c, l1: 1.0, l2: 1.0, g_inf: 0.0, dimension: 2 };
            assert!(check_barrier_supersolution(&bs, &spec, 64).unwrap().passed());
            let weak = BarrierSpec { rate: c / 4.0, ..bs.clone() };
            assert_eq!(check_barrier_supersolution(&weak, &spec, 64).unwrap().verdict, Verdict::Fail);
            let flat = BarrierSpec { amplitude: 0.0, ..bs };
            assert!(check_barrier_supersolution(&flat, &spec, 64).unwrap().passed());
        }
    }

    #[test]
    fn comparison_exact_1d() {
        let g = build_domain(&DomainSpec::interval(1.0), 64).unwrap();
        let spec = OperatorSpec::laplacian(0.0);
        let f1 = ScalarField::constant(&g, -1.0);
        let f2 = ScalarField::constant(&g, -2.0);
        let r = check_comparison(&spec, &g, &f1, &f2, 0.0, &SolveConfig::default()).unwrap();
        assert!(r.passed());
        // u1 - u2 = -x(1-x)/2 peaks next to the boundary.
        let h = g.h();
        assert!(math::abs(r.measured + 0.5 * h * (1.0 - h)) < 1e-9, "{}", r.measured);
        let same = check_comparison(&spec, &g, &f1, &f1, 0.0, &SolveConfig::default()).unwrap();
        assert!(same.passed() && math::abs(same.measured) <= 2e-8);
    }

    #[test]
    fn hopf_and_distance_on_simple_fields() {
        let g = build_domain(&DomainSpec::rectangle(1.0, 0.5), 32).unwrap();
        let d = distance_field(&g);
        let r = check_hopf(&g, &d, 0.5).unwrap();
        assert!(math::abs(r.measured - 1.0) < 1e-12, "{}", r.measured);
        let c = check_distance_comparability(&g, &d, &d).unwrap();
        assert!(c.passed() && math::abs(c.measured - 1.0) < 1e-12);
        let flat = ScalarField::constant(&g, 1.0);
        assert_eq!(check_hopf(&g, &flat, 0.5).unwrap().verdict, Verdict::Fail);

        let g1 = build_domain(&DomainSpec::interval(1.0), 1024).unwrap();
        let s = ScalarField::from_fn(&g1, |x| math::sin(core::f64::consts::PI * x[0]));
        let (q, _) = inward_quotient(&g1, &s);
        assert!(math::abs(q - core::f64::consts::PI) < 1e-4);
        let (c1, c2) = distance_ratios(&g1, &s, &distance_field(&g1)).unwrap();
        assert!(math::abs(c1 - 2.0) < 1e-4 && math::abs(c2 - core::f64::consts::PI) < 1e-4);
    }

    #[test]
    fn holder_examples() {
        let g = build_domain(&DomainSpec::interval(1.0), 1024).unwrap();
        let smooth = ScalarField::from_fn(&g, |x| 0.5 * x[0] * (1.0 - x[0]));
        let (b, c) = estimate_holder(&smooth, &g).unwrap();
        assert!(b.exponent >= 0.99 && c.exponent >= 0.9, "{b:?} {c:?}");
        let cusp = ScalarField::from_fn(&g, |x| math::pow(math::abs(x[0] - 0.5), 1.5));
        let (b, _) = estimate_holder(&cusp, &g).unwrap();
        assert!(math::abs(b.exponent - 0.5) < 0.05, "{b:?}");
        let tiny = build_domain(&DomainSpec::interval(1.0), 8).unwrap();
        assert!(matches!(estimate_holder(&ScalarField::zeros(&tiny), &tiny), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn scan_below_and_above() {
        let g = build_domain(&DomainSpec::interval(1.0), 64).unwrap();
        let spec = OperatorSpec::laplacian(0.0);
        let cfg = EigConfig::default();
        let start = initial_field(&g, 0);
        assert_eq!(scan_run(&spec, &g, 0.0, &start, &cfg, 50).unwrap().0, ScanOutcome::Decays);
        let lam = power_iterate(&spec, &g, &cfg, 0).unwrap().lambda;
        assert_eq!(scan_run(&spec, &g, 1.05 * lam, &start, &cfg, 200).unwrap().0, ScanOutcome::Diverges);
        let (o, _) = scan_run(&spec, &g, lam, &start, &cfg, 400).unwrap();
        assert_eq!(o, ScanOutcome::Nontrivial { constant_sign: true });
    }

    #[test]
    fn interval_monotonicity_ratio() {
        let spec = OperatorSpec::laplacian(0.0);
        let outer = DomainSpec::interval(1.0);
        let inner = DomainSpec::new(crate::grid::Shape::Interval { x0: 0.05, length: 0.9 });
        let r = check_domain_monotonicity(&spec, &outer, &inner, 200, &EigConfig::default(), 1e-3).unwrap();
        assert!(r.passed());
        let ratio = r.details.iter().find(|d| d.0 == "ratio").unwrap().1;
        assert!(math::abs(ratio / (1.0 / 0.81) - 1.0) < 0.01, "{ratio}");
    }
}
