//! Principal half-eigenvalues of the discrete operator.
//!
//! `lambda+` is computed by an inverse power iteration on the positive cone
//! and, independently, by bisection on the solvability of
//! `F_h[u] + (c + lambda)|u|^alpha u = -1` with `u > 0`. `lambda-` is
//! `lambda+` of the reflected operator `-F(x, -p, -M)`, whose eigenfunction
//! is the negative of the reflected one.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dirichlet::{amplitude_weight, default_cap, solve_impl, Overrides, SolveConfig, Solver};
use crate::error::{Error, Result};
use crate::grid::{distance_field, Grid, ScalarField};
use crate::math;
use crate::operators::{OperatorKind, OperatorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigMethod {
    Power,
    Bisection,
}

impl EigMethod {
    pub fn name(self) -> &'static str {
        match self {
            EigMethod::Power => "power",
            EigMethod::Bisection => "bisection",
        }
    }
}

/// How each power step inverts the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    /// One frozen-weight Bellman solve per step, weights taken from the
    /// current normalized iterate. Switches to `Nested` if it stalls.
    Fused,
    /// A full Dirichlet solve per step, finished by semismooth Newton.
    Nested,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigConfig {
    pub solve: SolveConfig,
    /// Relative tolerance on successive eigenvalue estimates, and on the
    /// bisection bracket width.
    pub eig_tol: f64,
    /// Sup-norm bound on `F_h[phi] + (c + lambda)|phi|^alpha phi` at exit.
    pub residual_tol: f64,
    pub max_iter: usize,
    pub mode: PowerMode,
    /// Bisection declares a probe infeasible above this multiple of the
    /// a priori solution bound.
    pub cap_factor: f64,
    /// Number of bracket enlargements tried before giving up.
    pub widen_budget: usize,
}

impl Default for EigConfig {
    fn default() -> Self {
        EigConfig {
            solve: SolveConfig::default(),
            eig_tol: 1e-9,
            residual_tol: 1e-6,
            max_iter: 500,
            mode: PowerMode::Fused,
            cap_factor: 1e12,
            widen_budget: 20,
        }
    }
}

impl EigConfig {
    pub fn validate(&self) -> Result<()> {
        self.solve.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.eig_tol > 0.0 && self.eig_tol < 1.0) {
            return bad("eig_tol must lie in (0, 1)");
        }
        if !(self.residual_tol > 0.0) {
            return bad("residual_tol must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(self.cap_factor >= 1.0) {
            return bad("cap_factor must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigResult {
    pub lambda: f64,
    /// Eigenfunction with unit sup-norm, zero on the boundary.
    pub phi: ScalarField,
    /// Sup-norm eigen-residual of `phi` at `lambda`.
    pub residual: f64,
    /// Collatz-Wielandt bounds evaluated at `phi`.
    pub cw_lower: f64,
    pub cw_upper: f64,
    pub iterations: usize,
    pub method: EigMethod,
    /// Final feasible/infeasible bracket for bisection.
    pub bracket: Option<(f64, f64)>,
    /// Successive eigenvalue estimates.
    pub history: Vec<f64>,
    /// Whether `min c + lambda > 0`.
    pub proper_shift: bool,
}

/// The operator `-F(x, -p, -M)`.
pub fn reflect_spec(spec: &OperatorSpec) -> OperatorSpec {
    let mut out = spec.clone();
    out.kind = match spec.kind {
        OperatorKind::PucciPlus => OperatorKind::PucciMinus,
        OperatorKind::PucciMinus => OperatorKind::PucciPlus,
        k => k,
    };
    out
}

/// Deterministic positive starting field. Seed 0 is the distance to the
/// boundary; other seeds multiply it by random Gaussian bumps.
pub fn initial_field(g: &Grid, seed: u64) -> ScalarField {
    let mut d = distance_field(g);
    if seed != 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let interior = g.interior();
        let width = 0.15 * g.diameter();
        let bumps: Vec<([f64; 2], f64)> = (0..3)
            .map(|_| {
                let c = g.coord(interior[rng.gen_range(0..interior.len())]);
                (c, rng.gen_range(0.5..2.0))
            })
            .collect();
        for &i in interior {
            let x = g.coord(i);
            let mut m = 1.0;
            for (c, amp) in &bumps {
                let r2 = (x[0] - c[0]) * (x[0] - c[0]) + (x[1] - c[1]) * (x[1] - c[1]);
                m += amp * math::exp(-r2 / (2.0 * width * width));
            }
            d.set(i, d.get(i) * m);
        }
    }
    d.normalize();
    d
}

/// Relative regularization used for unit-amplitude eigenfunctions.
pub(crate) fn eig_delta(cfg: &SolveConfig, g: &Grid, alpha: f64) -> f64 {
    let sched = cfg.relative_schedule(g, alpha);
    sched[sched.len() - 1] / g.diameter()
}

fn check_positive(g: &Grid, phi: &ScalarField) -> Result<()> {
    for &i in g.interior() {
        if !(phi.get(i) > 0.0) {
            return Err(Error::InvalidTestFunction { node: i });
        }
    }
    Ok(())
}

/// Minimum and maximum over interior nodes of
/// `(-F_h[phi] - c |phi|^alpha phi) / |phi|^alpha phi`, regularized at
/// `delta`. Requires `phi > 0` on the interior.
pub fn cw_bounds_with(spec: &OperatorSpec, g: &Grid, phi: &ScalarField, delta: f64, order: usize) -> Result<(f64, f64)> {
    spec.validate_for(g)?;
    phi.check(g)?;
    check_positive(g, phi)?;
    let scheme = crate::operators::Scheme::new(spec, g, order)?;
    let v = phi.values();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in g.interior() {
        let dphi = amplitude_weight(spec.alpha, v[i], delta) * v[i];
        let q = -scheme.residual_at(v, i, delta) / dphi - spec.zeroth_at(i);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    Ok((lo, hi))
}

fn default_delta(g: &Grid, phi: &ScalarField) -> f64 {
    let r = g.h() / g.diameter();
    r * r * r * phi.sup_norm() / g.diameter()
}

/// Collatz-Wielandt lower bound on `lambda+_h` from a positive test field.
pub fn cw_lower_bound(spec: &OperatorSpec, g: &Grid, phi: &ScalarField) -> Result<f64> {
    cw_bounds_with(spec, g, phi, default_delta(g, phi), 2).map(|b| b.0)
}

/// Collatz-Wielandt upper bound on `lambda+_h` from a positive test field.
pub fn cw_upper_bound(spec: &OperatorSpec, g: &Grid, phi: &ScalarField) -> Result<f64> {
    cw_bounds_with(spec, g, phi, default_delta(g, phi), 2).map(|b| b.1)
}

/// Fused steps without a new best residual before switching to nested.
const STALL: usize = 15;

/// Inverse power iteration from the seeded starting field.
pub fn power_iterate(spec: &OperatorSpec, g: &Grid, cfg: &EigConfig, seed: u64) -> Result<EigResult> {
    power_iterate_from(spec, g, cfg, &initial_field(g, seed))
}

/// Inverse power iteration from `init`, which must be positive inside.
///
/// With `c <= 0` each step inverts a proper operator. A positive part of
/// `c` is shifted into the eigenvalue and restored at the end.
pub fn power_iterate_from(spec: &OperatorSpec, g: &Grid, cfg: &EigConfig, init: &ScalarField) -> Result<EigResult> {
    cfg.validate()?;
    spec.validate_for(g)?;
    init.check(g)?;
    let mut phi = init.clone();
    for i in g.boundary_nodes() {
        phi.values_mut()[i] = 0.0;
    }
    check_positive(g, &phi)?;
    phi.normalize();

    let alpha = spec.alpha;
    let shift = spec.zeroth_max().max(0.0);
    let delta = eig_delta(&cfg.solve, g, alpha);
    let order = cfg.solve.stencil_order;
    let kappa: Vec<f64> = (0..g.len()).map(|i| if g.is_interior(i) { spec.zeroth_at(i) - shift } else { 0.0 }).collect();
    let mut solver = Solver::new(spec, g, &cfg.solve)?;

    let (lo0, hi0) = cw_bounds_with(spec, g, &phi, delta, order)?;
    let mut lambda = if lo0 > 0.0 { math::sqrt(lo0 * hi0) } else { hi0.max(1.0 / (g.diameter() * g.diameter())) };
    let mut history = Vec::new();
    let mut v = phi.values().to_vec();
    let mut rhs = vec![0.0; g.len()];
    let mut shifted = vec![0.0; g.len()];
    let zeros = vec![0.0; g.len()];
    let mut residual = f64::INFINITY;
    let mut mode = cfg.mode;
    let mut best = (f64::INFINITY, lambda, phi.clone());
    let mut best_at = 0;

    for it in 1..=cfg.max_iter {
        // Along a curve of critical points the frozen weight makes the fused
        // step expansive; fall back to nested Newton solves from the best
        // iterate when the residual climbs away or the budget runs low.
        if mode == PowerMode::Fused && (residual > 1e3 * best.0 || it > best_at + STALL || it > cfg.max_iter / 4) {
            mode = PowerMode::Nested;
            lambda = best.1;
            phi = best.2.clone();
        }
        let pv = phi.values();
        for &i in g.interior() {
            rhs[i] = -amplitude_weight(alpha, pv[i], delta) * pv[i];
        }
        let estimate = match mode {
            PowerMode::Fused => {
                // v ~ phi / lambda when phi is an eigenfunction.
                let guess = lambda + shift;
                for &i in g.interior() {
                    v[i] = pv[i] / guess;
                }
                solver.step(pv, &rhs, &kappa, delta, &mut v)?;
                let mu = sup_interior(g, &v);
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(Error::EigenNonConvergence("power step lost positivity".into()));
                }
                1.0 / mu
            }
            PowerMode::Nested => {
                let s = math::pow(lambda + shift, -1.0 / (1.0 + alpha));
                let start = phi.scaled(s);
                let f = ScalarField::from_values(g, rhs.clone())?;
                let sched = [delta * s];
                let mut sc = cfg.solve.clone();
                sc.epsilon = 0.0;
                sc.newton = true;
                let shifted_spec = shifted_spec(spec, shift);
                let (u, _) = solve_impl(
                    &shifted_spec,
                    g,
                    &f,
                    0.0,
                    &sc,
                    Overrides { init: Some(&start), schedule: Some(&sched), cap: Some(f64::MAX) },
                )?;
                v.copy_from_slice(u.values());
                let mu = sup_interior(g, &v);
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(Error::EigenNonConvergence("power step lost positivity".into()));
                }
                math::pow(mu, -(1.0 + alpha))
            }
        };
        let mu = sup_interior(g, &v);
        let pm = phi.values_mut();
        for &i in g.interior() {
            pm[i] = v[i] / mu;
        }
        let new_lambda = estimate - shift;
        history.push(new_lambda);
        for &i in g.interior() {
            shifted[i] = kappa[i] + shift + new_lambda;
        }
        residual = solver.residual(phi.values(), &zeros, &shifted, delta);
        let change = math::abs(new_lambda - lambda);
        lambda = new_lambda;
        if residual < best.0 {
            best = (residual, lambda, phi.clone());
            best_at = it;
        }
        if change <= cfg.eig_tol * math::abs(lambda).max(1e-300)
            && (residual <= cfg.residual_tol || solver.within_tol(phi.values(), &zeros, &shifted, delta, cfg.residual_tol))
        {
            return finish(spec, g, phi, lambda, residual, it, EigMethod::Power, None, history, delta, order);
        }
    }
    Err(Error::EigenNonConvergence(format!(
        "power iteration: {} steps, last estimate {lambda:.12e}, residual {residual:.3e}; try bisection",
        cfg.max_iter
    )))
}

fn shifted_spec(spec: &OperatorSpec, shift: f64) -> OperatorSpec {
    use crate::operators::Zeroth;
    if shift == 0.0 {
        return spec.clone();
    }
    let zeroth = match &spec.zeroth {
        Zeroth::Constant(c) => Zeroth::Constant(c - shift),
        Zeroth::Field(v) => Zeroth::Field(v.iter().map(|c| c - shift).collect()),
    };
    spec.clone().with_zeroth(zeroth)
}

fn sup_interior(g: &Grid, v: &[f64]) -> f64 {
    g.interior().iter().fold(0.0f64, |m, &i| m.max(math::abs(v[i])))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    spec: &OperatorSpec,
    g: &Grid,
    phi: ScalarField,
    lambda: f64,
    residual: f64,
    iterations: usize,
    method: EigMethod,
    bracket: Option<(f64, f64)>,
    history: Vec<f64>,
    delta: f64,
    order: usize,
) -> Result<EigResult> {
    let (cw_lower, cw_upper) = match cw_bounds_with(spec, g, &phi, delta, order) {
        Ok(b) => b,
        Err(Error::InvalidTestFunction { node }) => {
            return Err(Error::EigenNonConvergence(format!("eigenfunction not positive at node {node}")))
        }
        Err(e) => return Err(e),
    };
    let cmin = g.interior().iter().fold(f64::INFINITY, |m, &i| m.min(spec.zeroth_at(i)));
    Ok(EigResult {
        lambda,
        phi,
        residual,
        cw_lower,
        cw_upper,
        iterations,
        method,
        bracket,
        history,
        proper_shift: cmin + lambda > 0.0,
    })
}

/// Outcome of one solvability probe.
struct Probe {
    feasible: bool,
    u: Option<ScalarField>,
}

struct Prober<'a> {
    spec: &'a OperatorSpec,
    g: &'a Grid,
    cfg: SolveConfig,
    f: ScalarField,
    cap: f64,
    /// Final relative regularization and the gradient scale of the data.
    delta_rel: f64,
    sigma: f64,
    warm: Option<ScalarField>,
    probes: usize,
}

impl<'a> Prober<'a> {
    fn new(spec: &'a OperatorSpec, g: &'a Grid, cfg: &EigConfig) -> Self {
        let mut f = ScalarField::zeros(g);
        for &i in g.interior() {
            f.set(i, -1.0);
        }
        let sigma = crate::dirichlet::gradient_scale(spec, 1.0, g.diameter());
        let sched = cfg.solve.relative_schedule(g, spec.alpha);
        let mut sc = cfg.solve.clone();
        sc.epsilon = 0.0;
        sc.newton = true;
        Prober {
            spec,
            g,
            cfg: sc,
            f,
            cap: cfg.cap_factor * default_cap(spec, g, 1.0, 0.0),
            delta_rel: sched[sched.len() - 1],
            sigma,
            warm: None,
            probes: 0,
        }
    }

    /// One solve at `lambda` regularized relative to the amplitude `scale`
    /// and started from `init`.
    fn solve(&self, lambda: f64, init: Option<&ScalarField>, scale: f64) -> Result<Option<ScalarField>> {
        let sched = [self.delta_rel * scale];
        let ov = match init {
            Some(w) => Overrides { init: Some(w), schedule: Some(&sched), cap: Some(self.cap) },
            None => Overrides { cap: Some(self.cap), ..Overrides::default() },
        };
        match solve_impl(self.spec, self.g, &self.f, lambda, &self.cfg, ov) {
            Ok((u, rep)) => {
                let positive = self.g.interior().iter().all(|&i| u.get(i) > 0.0);
                Ok((rep.converged && positive && u.sup_norm() <= self.cap).then_some(u))
            }
            Err(Error::Divergence { .. } | Error::Stagnation { .. } | Error::InnerSolve { .. } | Error::Internal(_)) => {
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn run(&mut self, lambda: f64) -> Result<Probe> {
        self.probes += 1;
        let amplitude = |u: &ScalarField| self.sigma.max(u.sup_norm() / self.g.diameter());
        let mut scale = self.warm.as_ref().map_or(self.sigma, amplitude);
        let mut u = self.solve(lambda, self.warm.as_ref(), scale)?;
        // Regularize relative to the solution's own amplitude so that near
        // blow-up the probe sees the same scale-free problem as the power
        // iteration.
        if self.spec.alpha != 0.0 {
            for _ in 0..8 {
                let Some(cur) = &u else { break };
                let next = amplitude(cur);
                if math::abs(next / scale - 1.0) < 0.05 {
                    break;
                }
                scale = next;
                u = self.solve(lambda, Some(cur), scale)?;
            }
        }
        match u {
            Some(u) => {
                self.warm = Some(u.clone());
                Ok(Probe { feasible: true, u: Some(u) })
            }
            None => Ok(Probe { feasible: false, u: None }),
        }
    }
}

/// Bisection on solvability of `F_h[u] + (c + lambda)|u|^alpha u = -1`
/// with `u > 0`, starting from the bracket `[lo, hi]`. The bracket is
/// enlarged when `lo` is infeasible or `hi` feasible.
pub fn bisect_lambda(spec: &OperatorSpec, g: &Grid, cfg: &EigConfig, lo: f64, hi: f64) -> Result<EigResult> {
    cfg.validate()?;
    spec.validate_for(g)?;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidConfig("bisection bracket must satisfy lo < hi".into()));
    }
    let mut prober = Prober::new(spec, g, cfg);
    let (mut lo, mut hi) = (lo, hi);
    let mut best: Option<ScalarField>;
    let mut tries = 0;
    loop {
        let p = prober.run(lo)?;
        if p.feasible {
            best = p.u;
            break;
        }
        tries += 1;
        if tries > cfg.widen_budget {
            return Err(Error::Bracketing(format!("no feasible lower end found down to {lo}")));
        }
        let w = hi - lo;
        hi = lo;
        lo -= 2.0 * w;
    }
    tries = 0;
    loop {
        let p = prober.run(hi)?;
        if !p.feasible {
            break;
        }
        best = p.u;
        tries += 1;
        if tries > cfg.widen_budget {
            return Err(Error::Bracketing(format!("no infeasible upper end found up to {hi}")));
        }
        let w = hi - lo;
        lo = hi;
        hi += 2.0 * w;
    }
    let mut history = Vec::new();
    while hi - lo > cfg.eig_tol * math::abs(lo).max(math::abs(hi)).max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = prober.run(mid)?;
        if p.feasible {
            lo = mid;
            best = p.u;
        } else {
            hi = mid;
        }
        history.push(lo);
    }
    let mut phi = best.ok_or_else(|| Error::Internal("bisection kept no feasible solution".to_string()))?;
    phi.normalize();
    let delta = eig_delta(&cfg.solve, g, spec.alpha);
    let order = cfg.solve.stencil_order;
    let solver = Solver::new(spec, g, &cfg.solve)?;
    let kappa: Vec<f64> = (0..g.len()).map(|i| if g.is_interior(i) { spec.zeroth_at(i) + lo } else { 0.0 }).collect();
    let residual = solver.residual(phi.values(), &vec![0.0; g.len()], &kappa, delta);
    finish(spec, g, phi, lo, residual, prober.probes, EigMethod::Bisection, Some((lo, hi)), history, delta, order)
}

/// A bracket for bisection: the shift making the problem proper below, and
/// the Collatz-Wielandt upper bound of the distance field above.
pub fn default_bracket(spec: &OperatorSpec, g: &Grid) -> Result<(f64, f64)> {
    let lo = -spec.zeroth_max();
    let d = initial_field(g, 0);
    let hi = cw_upper_bound(spec, g, &d)?;
    if hi > lo {
        Ok((lo, hi))
    } else {
        Ok((lo, lo + 1.0 / (g.diameter() * g.diameter())))
    }
}

/// `lambda-` with its (negative) eigenfunction.
pub fn power_iterate_minus(spec: &OperatorSpec, g: &Grid, cfg: &EigConfig, seed: u64) -> Result<EigResult> {
    let mut r = power_iterate(&reflect_spec(spec), g, cfg, seed)?;
    r.phi.scale(-1.0);
    Ok(r)
}

/// Human-readable note on a result, used in reports.
pub fn describe(r: &EigResult) -> String {
    format!(
        "{} lambda={:.12e} residual={:.3e} cw=[{:.6e}, {:.6e}] iterations={}",
        r.method.name(),
        r.lambda,
        r.residual,
        r.cw_lower,
        r.cw_upper,
        r.iterations
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainSpec};
    use crate::oracle;

    #[test]
    fn laplacian_interval_matches_discrete_formula() {
        let n = 64;
        let g = build_domain(&DomainSpec::interval(1.0), n).unwrap();
        let r = power_iterate(&OperatorSpec::laplacian(0.0), &g, &EigConfig::default(), 0).unwrap();
        let h = 1.0 / n as f64;
        let exact = (2.0 - 2.0 * math::cos(core::f64::consts::PI * h)) / (h * h);
        assert!(math::abs(r.lambda - exact) < 1e-8 * exact, "{} {}", r.lambda, exact);
        assert!(r.cw_lower <= r.lambda + 1e-8 && r.lambda <= r.cw_upper + 1e-8);
    }

    #[test]
    fn sine_gives_tight_cw_bounds() {
        let n = 32;
        let g = build_domain(&DomainSpec::interval(1.0), n).unwrap();
        let phi = ScalarField::from_fn(&g, |x| math::sin(core::f64::consts::PI * x[0]));
        let spec = OperatorSpec::laplacian(0.0);
        let lo = cw_lower_bound(&spec, &g, &phi).unwrap();
        let hi = cw_upper_bound(&spec, &g, &phi).unwrap();
        assert!(math::abs(hi - lo) < 1e-9 * hi);
        let quad = ScalarField::from_fn(&g, |x| x[0] * (1.0 - x[0]));
        assert!(math::abs(cw_lower_bound(&spec, &g, &quad).unwrap() - 8.0) < 1e-9);
        let bad = ScalarField::from_fn(&g, |x| x[0] - 0.5);
        assert!(matches!(cw_lower_bound(&spec, &g, &bad), Err(Error::InvalidTestFunction { .. })));
    }

    #[test]
    fn singular_interval_near_closed_form() {
        let g = build_domain(&DomainSpec::interval(1.0), 128).unwrap();
        let r = power_iterate(&OperatorSpec::laplacian(-0.5), &g, &EigConfig::default(), 0).unwrap();
        let exact = oracle::closed_form_eig_1d(-0.5, 1.0);
        assert!(math::abs(r.lambda / exact - 1.0) < 0.01, "{} {}", r.lambda, exact);
    }

    #[test]
    fn bisection_agrees_with_power_linear() {
        let g = build_domain(&DomainSpec::interval(1.0), 64).unwrap();
        let spec = OperatorSpec::laplacian(0.0);
        let cfg = EigConfig { eig_tol: 1e-7, ..EigConfig::default() };
        let p = power_iterate(&spec, &g, &cfg, 0).unwrap();
        let (lo, hi) = default_bracket(&spec, &g).unwrap();
        let b = bisect_lambda(&spec, &g, &cfg, lo, hi).unwrap();
        assert!(math::abs(p.lambda - b.lambda) <= 2.0 * cfg.eig_tol * p.lambda, "{} {}", p.lambda, b.lambda);
    }

    #[test]
    fn nested_mode_agrees_with_fused() {
        let g = build_domain(&DomainSpec::interval(1.0), 64).unwrap();
        let spec = OperatorSpec::pucci_plus(1.0, 2.0, -0.5);
        let fused = power_iterate(&spec, &g, &EigConfig::default(), 0).unwrap();
        let cfg = EigConfig { mode: PowerMode::Nested, ..EigConfig::default() };
        let nested = power_iterate(&spec, &g, &cfg, 0).unwrap();
        assert!(math::abs(fused.lambda - nested.lambda) < 1e-6 * fused.lambda, "{} {}", fused.lambda, nested.lambda);
    }

    #[test]
    fn converged_eigenfunction_is_a_fixed_point() {
        let g = build_domain(&DomainSpec::interval(1.0), 64).unwrap();
        let spec = OperatorSpec::pucci_minus(1.0, 3.0, -0.3);
        let cfg = EigConfig::default();
        let r = power_iterate(&spec, &g, &cfg, 0).unwrap();
        let again = power_iterate_from(&spec, &g, &cfg, &r.phi).unwrap();
        assert!(again.iterations <= 2, "{}", again.iterations);
        assert!(math::abs(again.lambda - r.lambda) < 1e-8 * r.lambda);
    }

    #[test]
    fn positive_zeroth_term_is_shifted() {
        use crate::operators::Zeroth;
        let g = build_domain(&DomainSpec::interval(1.0), 64).unwrap();
        let base = power_iterate(&OperatorSpec::laplacian(0.0), &g, &EigConfig::default(), 0).unwrap();
        let spec = OperatorSpec::laplacian(0.0).with_zeroth(Zeroth::Constant(3.0));
        let r = power_iterate(&spec, &g, &EigConfig::default(), 0).unwrap();
        assert!(math::abs(r.lambda - (base.lambda - 3.0)) < 1e-7);
    }

    #[test]
    fn reflection_swaps_pucci() {
        let s = OperatorSpec::pucci_plus(1.0, 2.0, -0.5);
        assert_eq!(reflect_spec(&s).kind, OperatorKind::PucciMinus);
        assert_eq!(reflect_spec(&reflect_spec(&s)), s);
    }
}
