//! Dirichlet solver for `F[u] + (c(x) + lambda)|u|^alpha u = f`, `u = 0` on
//! the boundary.
//!
//! Each outer step freezes the gradient weight `(|Du|^2 + delta^2)^(-alpha/2)`
//! at the previous iterate and solves the resulting uniformly elliptic
//! Bellman problem. The Bellman problem is solved by policy iteration
//! (Howard) with direct tridiagonal solves in 1D and ILU(0)-BiCGSTAB in 2D,
//! or by red-black nonlinear Gauss-Seidel. The regularization `delta` is
//! driven to its floor by continuation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::linalg::{bicgstab, solve_tridiagonal, Csr};
use crate::math;
use crate::operators::{Coeffs, OperatorSpec, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerMethod {
    /// Policy iteration with exact linear solves.
    Howard,
    /// Red-black nonlinear Gauss-Seidel sweeps.
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Regularization levels relative to the natural gradient scale of the
    /// problem, strictly decreasing. Empty selects the geometric default
    /// `4^-k` down to `delta_min`.
    pub delta_schedule: Vec<f64>,
    /// Relative floor of the default schedule; `None` means `(h/d)^3`.
    pub delta_min: Option<f64>,
    /// Relaxation `theta` in `u <- (1-theta) u + theta T(u)`.
    pub damping: f64,
    /// Absolute sup-norm tolerance on the discrete residual.
    pub tol: f64,
    /// Budget of outer (frozen-weight) steps over all stages.
    pub max_outer: usize,
    /// Budget of policy iterations or Gauss-Seidel sweeps per inner solve.
    pub max_inner: usize,
    /// Steps allowed on each intermediate regularization level.
    pub stage_iterations: usize,
    /// Divergence cap on the sup-norm; `None` derives one from the data.
    pub cap: Option<f64>,
    /// Weight of the `-epsilon (|u|^2+delta^2)^(alpha/2) u` regularization.
    pub epsilon: f64,
    pub stencil_order: usize,
    pub inner: InnerMethod,
    /// Relative 2-norm tolerance of the Krylov solves.
    pub linear_rtol: f64,
    /// Finish the last regularization level with semismooth Newton steps
    /// once the frozen-weight iteration has run for a few steps.
    pub newton: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            delta_schedule: Vec::new(),
            delta_min: None,
            damping: 1.0,
            tol: 1e-8,
            max_outer: 400,
            max_inner: 60,
            stage_iterations: 3,
            cap: None,
            epsilon: 0.0,
            stencil_order: 2,
            inner: InnerMethod::Howard,
            linear_rtol: 1e-13,
            newton: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.delta_schedule.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return bad("delta schedule entries must be positive");
        }
        if self.delta_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad("delta schedule must be strictly decreasing");
        }
        if let Some(d) = self.delta_min {
            if !(d > 0.0 && d.is_finite()) {
                return bad("delta_min must be positive");
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.stage_iterations == 0 {
            return bad("iteration budgets must be positive");
        }
        if let Some(c) = self.cap {
            if !(c > 0.0) {
                return bad("cap must be positive");
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be non-negative");
        }
        if self.stencil_order != 1 && self.stencil_order != 2 {
            return bad("stencil order must be 1 or 2");
        }
        if !(self.linear_rtol > 0.0 && self.linear_rtol < 1.0) {
            return bad("linear_rtol must lie in (0, 1)");
        }
        Ok(())
    }

    /// Relative regularization levels for grid `g` and exponent `alpha`.
    /// With `alpha = 0` the weight is identically one and a single level is
    /// used.
    pub fn relative_schedule(&self, g: &Grid, alpha: f64) -> Vec<f64> {
        if !self.delta_schedule.is_empty() {
            return self.delta_schedule.clone();
        }
        let floor = self.delta_min.unwrap_or_else(|| {
            let r = g.h() / g.diameter();
            r * r * r
        });
        if alpha == 0.0 {
            return vec![floor];
        }
        let mut out = Vec::new();
        let mut d = 1.0;
        while d > floor {
            out.push(d);
            d *= 0.25;
        }
        out.push(floor);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub outer_iterations: usize,
    /// Total policy iterations or sweeps over all inner solves.
    pub inner_iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
    /// Absolute regularization at exit.
    pub delta: f64,
    /// `(delta, max adjacent difference quotient)` at the end of each stage.
    pub lipschitz: Vec<(f64, f64)>,
}

/// `(u^2 + delta^2)^(alpha/2)`.
#[inline]
pub(crate) fn amplitude_weight(alpha: f64, u: f64, delta: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        math::pow(u * u + delta * delta, 0.5 * alpha)
    }
}

/// Bound on the solution size used as a blow-up detector: ten times
/// `d (c_L |f| / (1 - epsilon c_L d))^(1/(1+alpha))`, with
/// `c_L = d/a exp(|h| d / a)` the one-dimensional flux bound.
pub fn default_cap(spec: &OperatorSpec, g: &Grid, f_norm: f64, epsilon: f64) -> f64 {
    if f_norm == 0.0 {
        return f64::MAX;
    }
    let d = g.diameter();
    let c_lin = d / spec.a_min * math::exp(spec.drift_sup() * d / spec.a_min);
    let shrink = 1.0 - epsilon * c_lin * d;
    if shrink <= 0.0 {
        return f64::MAX;
    }
    10.0 * d * math::pow(c_lin * f_norm / shrink, 1.0 / (1.0 + spec.alpha))
}

/// Gradient scale `(|f| d / a)^(1/(1+alpha))` of a solution with data `f`.
pub(crate) fn gradient_scale(spec: &OperatorSpec, f_norm: f64, d: f64) -> f64 {
    if f_norm > 0.0 {
        math::pow(f_norm * d / spec.a_min, 1.0 / (1.0 + spec.alpha))
    } else {
        1.0 / d
    }
}

/// Frozen-weight solver state shared by the Dirichlet and eigen drivers.
pub(crate) struct Solver<'a> {
    pub scheme: Scheme<'a>,
    pub grid: &'a Grid,
    inner: InnerMethod,
    max_inner: usize,
    linear_rtol: f64,
    policy: Vec<Coeffs>,
    have_policy: bool,
    z: Vec<f64>,
    r: Vec<f64>,
    grads: Vec<[f64; 2]>,
    pub inner_total: usize,
}

impl<'a> Solver<'a> {
    pub fn new(spec: &'a OperatorSpec, g: &'a Grid, cfg: &SolveConfig) -> Result<Self> {
        cfg.validate()?;
        let scheme = Scheme::new(spec, g, cfg.stencil_order)?;
        let m = g.interior().len();
        Ok(Solver {
            scheme,
            grid: g,
            inner: cfg.inner,
            max_inner: cfg.max_inner,
            linear_rtol: cfg.linear_rtol,
            policy: vec![[0.0; 4]; m],
            have_policy: false,
            z: vec![0.0; m],
            r: vec![0.0; m],
            grads: vec![[0.0; 2]; m],
            inner_total: 0,
        })
    }

    /// One frozen-weight step. `v` solves
    /// `F~_h[v] + h.Dv + kappa D(u) W(u) v = rhs W(u)` with
    /// `W(u) = (|Du|^2+delta^2)^(-alpha/2)`, `D(u) = (u^2+delta^2)^(alpha/2)`.
    /// `v` enters as the initial guess.
    pub fn step(&mut self, u: &[f64], rhs: &[f64], kappa: &[f64], delta: f64, v: &mut [f64]) -> Result<usize> {
        let alpha = self.scheme.spec.alpha;
        for (k, &i) in self.grid.interior().iter().enumerate() {
            let p = self.scheme.gradient(u, i);
            let w = 1.0 / self.scheme.weight(p, delta);
            self.grads[k] = p;
            self.z[k] = kappa[i] * amplitude_weight(alpha, u[i], delta) * w;
            self.r[k] = rhs[i] * w;
        }
        let it = self.bellman(v, delta)?;
        self.inner_total += it;
        Ok(it)
    }

    fn bellman(&mut self, v: &mut [f64], delta: f64) -> Result<usize> {
        for i in self.grid.boundary_nodes() {
            v[i] = 0.0;
        }
        match self.inner {
            InnerMethod::Howard => self.howard(v, delta),
            InnerMethod::GaussSeidel => self.gauss_seidel(v, delta),
        }
    }

    /// Sup-norm of `opt_P L_P v + z v - r` over interior nodes.
    fn bellman_residual(&self, v: &[f64], delta: f64) -> f64 {
        let mut res: f64 = 0.0;
        for (k, &i) in self.grid.interior().iter().enumerate() {
            let p = self.grads[k];
            let t = self.scheme.tilde(v, i, p, delta) + self.scheme.drift_term(v, i);
            res = res.max(math::abs(t + self.z[k] * v[i] - self.r[k]));
        }
        res
    }

    fn howard(&mut self, v: &mut [f64], delta: f64) -> Result<usize> {
        let interior = self.grid.interior();
        let r_scale = self.r.iter().fold(0.0f64, |m, x| m.max(math::abs(*x)));
        if r_scale == 0.0 {
            for &i in interior {
                v[i] = 0.0;
            }
            return Ok(0);
        }
        let pucci = self.scheme.is_pucci();
        for it in 0..self.max_inner {
            let mut changed = !self.have_policy || !pucci;
            for (k, &i) in interior.iter().enumerate() {
                let p = self.grads[k];
                let c = if pucci && self.have_policy && it == 0 {
                    // Keep the warm policy for the first solve.
                    self.policy[k]
                } else {
                    self.scheme.optimal_coeffs(v, i, p, delta)
                };
                if c != self.policy[k] {
                    changed = true;
                    self.policy[k] = c;
                }
            }
            self.have_policy = true;
            if it > 0 && (!changed || !pucci) {
                return Ok(it);
            }
            if it > 0 && self.bellman_residual(v, delta) <= 1e-14 * r_scale {
                return Ok(it);
            }
            self.linear_solve(v)?;
            if !pucci {
                return Ok(1);
            }
        }
        let res = self.bellman_residual(v, delta);
        if res <= 1e-10 * r_scale {
            Ok(self.max_inner)
        } else {
            Err(Error::InnerSolve { iterations: self.max_inner, residual: res })
        }
    }

    /// Solves `L_policy v + z v = r` on the interior, `v = 0` on the boundary.
    fn linear_solve(&self, v: &mut [f64]) -> Result<()> {
        let g = self.grid;
        let interior = g.interior();
        let m = interior.len();
        if g.dimension() == 1 {
            let (mut sub, mut diag, mut sup, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
            for (k, &i) in interior.iter().enumerate() {
                let row = self.scheme.row(i, &self.policy[k]);
                diag[k] = -(row.center + self.z[k]);
                rhs[k] = -self.r[k];
                for &(j, w) in &row.nb[..row.len] {
                    let cj = g.compact_index(j);
                    if cj == crate::grid::NOT_INTERIOR {
                        continue;
                    }
                    if cj + 1 == k {
                        sub[k] -= w;
                    } else if cj == k + 1 {
                        sup[k] -= w;
                    }
                }
            }
            let x = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
            for (k, &i) in interior.iter().enumerate() {
                v[i] = x[k];
            }
            return Ok(());
        }
        let mut a = Csr::with_capacity(m, 9 * m);
        let mut b = vec![0.0; m];
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(12);
        for (k, &i) in interior.iter().enumerate() {
            let row = self.scheme.row(i, &self.policy[k]);
            entries.clear();
            entries.push((k, -(row.center + self.z[k])));
            for &(j, w) in &row.nb[..row.len] {
                let cj = g.compact_index(j);
                if cj != crate::grid::NOT_INTERIOR {
                    entries.push((cj, -w));
                }
            }
            a.push_row(&mut entries);
            b[k] = -self.r[k];
        }
        let mut x: Vec<f64> = interior.iter().map(|&i| v[i]).collect();
        bicgstab(&a, &b, &mut x, self.linear_rtol, 20 * m.max(100))?;
        for (k, &i) in interior.iter().enumerate() {
            v[i] = x[k];
        }
        Ok(())
    }

    fn gauss_seidel(&mut self, v: &mut [f64], delta: f64) -> Result<usize> {
        let g = self.grid;
        let interior = g.interior();
        let nx = g.nx();
        let max_type = self.scheme.is_max_type();
        let mut cands = [[0.0; 4]; 8];
        let scale = |v: &[f64]| interior.iter().fold(0.0f64, |m, &i| m.max(math::abs(v[i])));
        for sweep in 1..=self.max_inner {
            let mut change: f64 = 0.0;
            for colour in 0..2 {
                for (k, &i) in interior.iter().enumerate() {
                    if (i % nx + i / nx) % 2 != colour {
                        continue;
                    }
                    let n = self.scheme.candidates(i, self.grads[k], delta, &mut cands);
                    let mut best = if max_type { f64::NEG_INFINITY } else { f64::INFINITY };
                    for c in &cands[..n] {
                        let row = self.scheme.row(i, c);
                        let d = -(row.center + self.z[k]);
                        if d <= 0.0 {
                            return Err(Error::InnerSolve { iterations: sweep, residual: f64::INFINITY });
                        }
                        let x = (row.neighbours(v) - self.r[k]) / d;
                        best = if max_type { best.max(x) } else { best.min(x) };
                    }
                    change = change.max(math::abs(best - v[i]));
                    v[i] = best;
                }
            }
            if change <= 1e-13 * scale(v).max(f64::MIN_POSITIVE) {
                return Ok(sweep);
            }
        }
        Err(Error::InnerSolve { iterations: self.max_inner, residual: self.bellman_residual(v, delta) })
    }

    /// Semismooth Newton on `F_h[u] + kappa D(u) u = f` with backtracking.
    /// The Jacobian uses the active policy and differentiates the gradient
    /// weight and `D`; the dependence of `qtrace` coefficients on the
    /// gradient direction is ignored. Returns the final residual on success
    /// and `None` when the line search stalls.
    pub fn newton(&mut self, u: &mut [f64], f: &[f64], kappa: &[f64], delta: f64, tol: f64, max_iter: usize) -> Result<Option<f64>> {
        let g = self.grid;
        let interior = g.interior();
        let m = interior.len();
        let alpha = self.scheme.spec.alpha;
        let half = 0.5 / g.h();
        let nx = g.nx() as isize;
        let grad_nbrs: &[(isize, usize, f64)] =
            if g.dimension() == 1 { &[(1, 0, 1.0), (-1, 0, -1.0)] } else { &[(1, 0, 1.0), (-1, 0, -1.0), (nx, 1, 1.0), (-nx, 1, -1.0)] };
        let mut res = self.residual(u, f, kappa, delta);
        let mut r = vec![0.0; m];
        let mut trial = u.to_vec();
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(16);
        for _ in 0..max_iter {
            if self.within_tol(u, f, kappa, delta, tol) {
                return Ok(Some(res));
            }
            let mut a = Csr::with_capacity(m, 13 * m);
            for (k, &i) in interior.iter().enumerate() {
                let p = self.scheme.gradient(u, i);
                let w = self.scheme.weight(p, delta);
                let coeffs = self.scheme.optimal_coeffs(u, i, p, delta);
                let row = self.scheme.row(i, &coeffs);
                let t = row.apply(u, i);
                let d = amplitude_weight(alpha, u[i], delta);
                r[k] = w * t + kappa[i] * d * u[i] - f[i];
                // d/du [(u^2+delta^2)^(alpha/2) u]
                let dd = if alpha == 0.0 { 1.0 } else { d * (u[i] * u[i] * (1.0 + alpha) + delta * delta) / (u[i] * u[i] + delta * delta) };
                entries.clear();
                entries.push((k, w * row.center + kappa[i] * dd));
                for &(j, wj) in &row.nb[..row.len] {
                    let cj = g.compact_index(j);
                    if cj != crate::grid::NOT_INTERIOR {
                        entries.push((cj, w * wj));
                    }
                }
                if alpha != 0.0 {
                    let s2 = p[0] * p[0] + p[1] * p[1] + delta * delta;
                    let dw = alpha * math::pow(s2, 0.5 * alpha - 1.0);
                    for &(off, c, sign) in grad_nbrs {
                        let j = (i as isize + off) as usize;
                        let cj = g.compact_index(j);
                        if cj != crate::grid::NOT_INTERIOR {
                            entries.push((cj, t * dw * p[c] * sign * half));
                        }
                    }
                }
                a.push_row(&mut entries);
            }
            let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
            let mut step = vec![0.0; m];
            if g.dimension() == 1 {
                let (mut sub, mut diag, mut sup) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
                for k in 0..m {
                    for e in a.row_ptr[k]..a.row_ptr[k + 1] {
                        let c = a.col[e];
                        if c == k {
                            diag[k] = a.val[e];
                        } else if c + 1 == k {
                            sub[k] = a.val[e];
                        } else if c == k + 1 {
                            sup[k] = a.val[e];
                        }
                    }
                }
                match solve_tridiagonal(&sub, &diag, &sup, &rhs) {
                    Ok(x) => step = x,
                    Err(_) => return Ok(None),
                }
            } else if bicgstab(&a, &rhs, &mut step, self.linear_rtol.max(1e-12), 20 * m.max(100)).is_err() {
                return Ok(None);
            }
            let mut t = 1.0;
            loop {
                trial.copy_from_slice(u);
                for (k, &i) in interior.iter().enumerate() {
                    trial[i] = u[i] + t * step[k];
                }
                let next = self.residual(&trial, f, kappa, delta);
                if next.is_finite() && next <= (1.0 - 1e-4 * t) * res {
                    u.copy_from_slice(&trial);
                    res = next;
                    break;
                }
                t *= 0.5;
                if t < 1.0 / 64.0 {
                    return Ok(None);
                }
            }
        }
        Ok(if self.within_tol(u, f, kappa, delta, tol) { Some(res) } else { None })
    }

    /// Whether every interior residual is within `tol` plus its own
    /// rounding-error level, a small multiple of machine epsilon times the
    /// sum of magnitudes of the terms at that node.
    pub fn within_tol(&self, u: &[f64], f: &[f64], kappa: &[f64], delta: f64, tol: f64) -> bool {
        let alpha = self.scheme.spec.alpha;
        self.grid.interior().iter().all(|&i| {
            let p = self.scheme.gradient(u, i);
            let k = self.scheme.optimal_coeffs(u, i, p, delta);
            let row = self.scheme.row(i, &k);
            let w = self.scheme.weight(p, delta);
            let zeroth = kappa[i] * amplitude_weight(alpha, u[i], delta) * u[i];
            let t = row.apply(u, i);
            let mut mag = math::abs(row.center * u[i]);
            for &(j, wj) in &row.nb[..row.len] {
                mag += math::abs(wj * u[j]);
            }
            let floor = 16.0 * f64::EPSILON * (w * mag + math::abs(zeroth) + math::abs(f[i]));
            math::abs(w * t + zeroth - f[i]) <= tol + floor
        })
    }

    /// Sup-norm of `F_h[u] + kappa (u^2+delta^2)^(alpha/2) u - f`.
    pub fn residual(&self, u: &[f64], f: &[f64], kappa: &[f64], delta: f64) -> f64 {
        let alpha = self.scheme.spec.alpha;
        let mut res: f64 = 0.0;
        for &i in self.grid.interior() {
            let e = self.scheme.residual_at(u, i, delta) + kappa[i] * amplitude_weight(alpha, u[i], delta) * u[i] - f[i];
            res = res.max(math::abs(e));
        }
        res
    }
}

/// Frozen-weight steps on the last level before Newton is tried.
const NEWTON_AFTER: usize = 5;

/// Largest difference quotient between lattice neighbours.
pub(crate) fn lipschitz_quotient(g: &Grid, u: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    let dirs: &[(isize, isize)] = if g.dimension() == 1 { &[(1, 0)] } else { &[(1, 0), (0, 1)] };
    for i in 0..g.len() {
        if u[i].is_nan() {
            continue;
        }
        for &(dx, dy) in dirs {
            if let Some(j) = g.neighbor(i, dx, dy) {
                if !u[j].is_nan() {
                    best = best.max(math::abs(u[j] - u[i]) / g.h());
                }
            }
        }
    }
    best
}

/// The map `T`: `v` solves `F~_h[v] + h.Dv = (f + epsilon D(u) u) W(u)` with
/// zero boundary values.
pub fn apply_t(
    spec: &OperatorSpec,
    g: &Grid,
    u: &ScalarField,
    f: &ScalarField,
    delta: f64,
    epsilon: f64,
    cfg: &SolveConfig,
) -> Result<ScalarField> {
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig("apply_t needs delta > 0".into()));
    }
    u.check(g)?;
    f.check(g)?;
    let mut solver = Solver::new(spec, g, cfg)?;
    let alpha = spec.alpha;
    let uv = u.values();
    let rhs: Vec<f64> = (0..g.len())
        .map(|i| {
            let fi = f.get(i);
            if fi.is_nan() {
                0.0
            } else {
                fi + epsilon * amplitude_weight(alpha, uv[i], delta) * uv[i]
            }
        })
        .collect();
    let kappa = vec![0.0; g.len()];
    let mut v = ScalarField::zeros(g);
    solver.step(uv, &rhs, &kappa, delta, v.values_mut())?;
    Ok(v)
}

/// Solves the Dirichlet problem from a zero initial guess.
pub fn solve_dirichlet(
    spec: &OperatorSpec,
    g: &Grid,
    f: &ScalarField,
    lambda: f64,
    cfg: &SolveConfig,
) -> Result<(ScalarField, SolveReport)> {
    solve_impl(spec, g, f, lambda, cfg, Overrides::default())
}

/// Solves the Dirichlet problem starting from `init`.
pub fn solve_dirichlet_from(
    spec: &OperatorSpec,
    g: &Grid,
    f: &ScalarField,
    lambda: f64,
    cfg: &SolveConfig,
    init: &ScalarField,
) -> Result<(ScalarField, SolveReport)> {
    init.check(g)?;
    solve_impl(spec, g, f, lambda, cfg, Overrides { init: Some(init), ..Overrides::default() })
}

/// Driver-level knobs not exposed through [`SolveConfig`].
#[derive(Default)]
pub(crate) struct Overrides<'a> {
    pub init: Option<&'a ScalarField>,
    /// Absolute regularization levels replacing the relative schedule.
    pub schedule: Option<&'a [f64]>,
    pub cap: Option<f64>,
}

pub(crate) fn solve_impl(
    spec: &OperatorSpec,
    g: &Grid,
    f: &ScalarField,
    lambda: f64,
    cfg: &SolveConfig,
    ov: Overrides<'_>,
) -> Result<(ScalarField, SolveReport)> {
    f.check(g)?;
    if !lambda.is_finite() {
        return Err(Error::InvalidConfig("lambda must be finite".into()));
    }
    let mut solver = Solver::new(spec, g, cfg)?;
    let alpha = spec.alpha;
    let f_norm = f.sup_norm();
    let cap = ov.cap.or(cfg.cap).unwrap_or_else(|| default_cap(spec, g, f_norm, cfg.epsilon));
    let schedule: Vec<f64> = match ov.schedule {
        Some(s) if !s.is_empty() => s.to_vec(),
        _ => {
            let sigma = gradient_scale(spec, f_norm, g.diameter());
            cfg.relative_schedule(g, alpha).iter().map(|d| d * sigma).collect()
        }
    };
    let fv: Vec<f64> = f.values().iter().map(|&x| if x.is_nan() { 0.0 } else { x }).collect();
    let kappa: Vec<f64> = (0..g.len())
        .map(|i| if g.is_interior(i) { spec.zeroth_at(i) + lambda - cfg.epsilon } else { 0.0 })
        .collect();

    let mut u = match ov.init {
        Some(u0) => u0.clone(),
        None => ScalarField::zeros(g),
    };
    for i in g.boundary_nodes() {
        u.values_mut()[i] = 0.0;
    }
    let mut v = u.values().to_vec();
    let mut history = Vec::new();
    let mut lipschitz = Vec::new();
    let mut outer = 0;
    let mut theta = cfg.damping;
    let mut rises = 0;
    let last = schedule.len() - 1;
    let mut res = f64::INFINITY;
    for (s, &delta) in schedule.iter().enumerate() {
        res = solver.residual(u.values(), &fv, &kappa, delta);
        let budget = if s == last { usize::MAX } else { cfg.stage_iterations };
        let mut taken = 0;
        let mut next_newton = NEWTON_AFTER;
        while !solver.within_tol(u.values(), &fv, &kappa, delta, cfg.tol) && taken < budget {
            if outer >= cfg.max_outer {
                return Err(Error::Stagnation { iterations: outer, residual: res });
            }
            if cfg.newton && s == last && taken >= next_newton {
                match solver.newton(u.values_mut(), &fv, &kappa, delta, cfg.tol, cfg.max_inner)? {
                    Some(r) => {
                        res = r;
                        history.push(res);
                        outer += 1;
                        break;
                    }
                    None => next_newton = taken + 4 * NEWTON_AFTER,
                }
            }
            solver.step(u.values(), &fv, &kappa, delta, &mut v)?;
            let uu = u.values_mut();
            for &i in g.interior() {
                uu[i] = (1.0 - theta) * uu[i] + theta * v[i];
            }
            let norm = u.sup_norm();
            if !(norm <= cap) {
                return Err(Error::Divergence { norm, cap });
            }
            let next = solver.residual(u.values(), &fv, &kappa, delta);
            if next > res {
                rises += 1;
                if rises >= 3 && theta > 1.0 / 16.0 {
                    theta *= 0.5;
                    rises = 0;
                }
            } else {
                rises = 0;
            }
            res = next;
            history.push(res);
            outer += 1;
            taken += 1;
            // The next guess for T(u) is the current iterate.
            v.copy_from_slice(u.values());
        }
        lipschitz.push((delta, lipschitz_quotient(g, u.values())));
    }
    let report = SolveReport {
        converged: solver.within_tol(u.values(), &fv, &kappa, schedule[last], cfg.tol),
        outer_iterations: outer,
        inner_iterations: solver.inner_total,
        residual: res,
        history,
        delta: schedule[last],
        lipschitz,
    };
    Ok((u, report))
}
