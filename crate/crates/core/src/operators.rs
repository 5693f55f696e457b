//! Operator family `F(x, p, M) = |p|^alpha (F~(x, M) + h(x).p)` with Pucci,
//! linear and q-trace second-order parts, pointwise evaluation, and the
//! monotone wide-stencil discretization used by every solver.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::math;

/// Symmetric 2x2 matrix. A 1D second derivative `s` is `SymMat2::scalar(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl SymMat2 {
    pub const fn new(m11: f64, m12: f64, m22: f64) -> Self {
        SymMat2 { m11, m12, m22 }
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        SymMat2::new(d1, 0.0, d2)
    }

    pub const fn identity() -> Self {
        SymMat2::diag(1.0, 1.0)
    }

    pub const fn scalar(s: f64) -> Self {
        SymMat2::new(s, 0.0, 0.0)
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    /// Eigenvalues `(larger, smaller)` in closed form.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.m11 + self.m22);
        let rad = math::hypot(0.5 * (self.m11 - self.m22), self.m12);
        (mean + rad, mean - rad)
    }

    pub fn neg(&self) -> SymMat2 {
        SymMat2::new(-self.m11, -self.m12, -self.m22)
    }

    pub fn add(&self, o: &SymMat2) -> SymMat2 {
        SymMat2::new(self.m11 + o.m11, self.m12 + o.m12, self.m22 + o.m22)
    }

    pub fn scale(&self, t: f64) -> SymMat2 {
        SymMat2::new(t * self.m11, t * self.m12, t * self.m22)
    }

    /// `v^T M v`.
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.m11 * v[0] * v[0] + 2.0 * self.m12 * v[0] * v[1] + self.m22 * v[1] * v[1]
    }

    /// `tr(self * o)`.
    pub fn frobenius(&self, o: &SymMat2) -> f64 {
        self.m11 * o.m11 + 2.0 * self.m12 * o.m12 + self.m22 * o.m22
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PucciSign {
    Plus,
    Minus,
}

/// Pucci extremal operator: `A sum e+ - a sum e-` over the eigenvalues for
/// `Plus`, and `-M+(-M)` for `Minus`.
pub fn pucci_eval(m: &SymMat2, a: f64, big_a: f64, sign: PucciSign) -> f64 {
    match sign {
        PucciSign::Plus => {
            let (e1, e2) = m.eigenvalues();
            let phi = |e: f64| if e > 0.0 { big_a * e } else { a * e };
            phi(e1) + phi(e2)
        }
        PucciSign::Minus => -pucci_eval(&m.neg(), a, big_a, PucciSign::Plus),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    PucciPlus,
    PucciMinus,
    Linear,
    QTrace,
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::PucciPlus => "pucci_plus",
            OperatorKind::PucciMinus => "pucci_minus",
            OperatorKind::Linear => "linear",
            OperatorKind::QTrace => "qtrace",
        }
    }
}

/// First-order coefficient `h(x)`; per-node fields are indexed by grid node.
#[derive(Debug, Clone, PartialEq)]
pub enum Drift {
    Constant([f64; 2]),
    Field(Vec<[f64; 2]>),
}

/// Zeroth-order coefficient `c(x)`; per-node fields are indexed by grid node.
#[derive(Debug, Clone, PartialEq)]
pub enum Zeroth {
    Constant(f64),
    Field(Vec<f64>),
}

/// Coefficient matrix `A(x)` of the linear kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Constant(SymMat2),
    Field(Vec<SymMat2>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    /// Lower ellipticity bound `a`.
    pub a_min: f64,
    /// Upper ellipticity bound `A`.
    pub a_max: f64,
    pub q: f64,
    pub alpha: f64,
    pub drift: Drift,
    pub zeroth: Zeroth,
    /// Used by the linear kind only.
    pub coefficients: Coefficients,
}

impl OperatorSpec {
    fn base(kind: OperatorKind, a: f64, big_a: f64, alpha: f64) -> Self {
        OperatorSpec {
            kind,
            a_min: a,
            a_max: big_a,
            q: 0.0,
            alpha,
            drift: Drift::Constant([0.0, 0.0]),
            zeroth: Zeroth::Constant(0.0),
            coefficients: Coefficients::Constant(SymMat2::identity()),
        }
    }

    pub fn pucci_plus(a: f64, big_a: f64, alpha: f64) -> Self {
        Self::base(OperatorKind::PucciPlus, a, big_a, alpha)
    }

    pub fn pucci_minus(a: f64, big_a: f64, alpha: f64) -> Self {
        Self::base(OperatorKind::PucciMinus, a, big_a, alpha)
    }

    /// `|p|^alpha tr M`, written as the Pucci operator with `a = A = 1`.
    pub fn laplacian(alpha: f64) -> Self {
        Self::pucci_plus(1.0, 1.0, alpha)
    }

    /// Linear kind `tr(A(x) M)`; every `A(x)` must have eigenvalues in `[a, A]`.
    pub fn linear(coefficients: Coefficients, a: f64, big_a: f64, alpha: f64) -> Result<Self> {
        let mut s = Self::base(OperatorKind::Linear, a, big_a, alpha);
        s.coefficients = coefficients;
        s.validate()?;
        Ok(s)
    }

    /// `tr M + q <M p^, p^>`, uniformly elliptic with bounds `1` and `1 + q`.
    pub fn qtrace(q: f64, alpha: f64) -> Self {
        let mut s = Self::base(OperatorKind::QTrace, 1.0, 1.0 + q, alpha);
        s.q = q;
        s
    }

    pub fn with_drift(mut self, drift: Drift) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_zeroth(mut self, zeroth: Zeroth) -> Self {
        self.zeroth = zeroth;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidOperator(m));
        if !(self.a_min > 0.0 && self.a_min <= self.a_max && self.a_max.is_finite()) {
            return bad(format!("need 0 < a <= A, got a = {}, A = {}", self.a_min, self.a_max));
        }
        if !(self.alpha > -1.0 && self.alpha <= 0.0) {
            return bad(format!("alpha = {} outside (-1, 0]", self.alpha));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return bad(format!("q = {} must be non-negative", self.q));
        }
        let finite_drift = match &self.drift {
            Drift::Constant(h) => h.iter().all(|v| v.is_finite()),
            Drift::Field(f) => f.iter().flatten().all(|v| v.is_finite()),
        };
        if !finite_drift {
            return bad("drift must be finite".into());
        }
        let finite_c = match &self.zeroth {
            Zeroth::Constant(c) => c.is_finite(),
            Zeroth::Field(f) => f.iter().all(|v| v.is_finite() || v.is_nan()),
        };
        if !finite_c {
            return bad("zeroth-order coefficient must be finite".into());
        }
        if self.kind == OperatorKind::Linear {
            let tol = 1e-12 * self.a_max;
            let check = |m: &SymMat2| {
                let (e1, e2) = m.eigenvalues();
                e2 >= self.a_min - tol && e1 <= self.a_max + tol
            };
            let ok = match &self.coefficients {
                Coefficients::Constant(m) => check(m),
                Coefficients::Field(f) => f.iter().all(check),
            };
            if !ok {
                return bad("coefficient matrix eigenvalues outside [a, A]".into());
            }
        }
        Ok(())
    }

    /// Checks that per-node fields match the grid.
    pub fn validate_for(&self, g: &Grid) -> Result<()> {
        self.validate()?;
        let n = g.len();
        let lens = [
            match &self.drift {
                Drift::Field(f) => Some(f.len()),
                _ => None,
            },
            match &self.zeroth {
                Zeroth::Field(f) => Some(f.len()),
                _ => None,
            },
            match (&self.coefficients, self.kind) {
                (Coefficients::Field(f), OperatorKind::Linear) => Some(f.len()),
                _ => None,
            },
        ];
        if lens.iter().flatten().any(|&l| l != n) {
            return Err(Error::InvalidOperator("coefficient field length does not match grid".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn drift_at(&self, node: usize) -> [f64; 2] {
        match &self.drift {
            Drift::Constant(h) => *h,
            Drift::Field(f) => f[node],
        }
    }

    #[inline]
    pub fn zeroth_at(&self, node: usize) -> f64 {
        match &self.zeroth {
            Zeroth::Constant(c) => *c,
            Zeroth::Field(f) => f[node],
        }
    }

    #[inline]
    pub fn coefficients_at(&self, node: usize) -> SymMat2 {
        match &self.coefficients {
            Coefficients::Constant(m) => *m,
            Coefficients::Field(f) => f[node],
        }
    }

    /// Sup-norm of the drift.
    pub fn drift_sup(&self) -> f64 {
        match &self.drift {
            Drift::Constant(h) => math::hypot(h[0], h[1]),
            Drift::Field(f) => f.iter().fold(0.0, |m, h| m.max(math::hypot(h[0], h[1]))),
        }
    }

    /// Largest value of `c(x)` (over the supplied field, NaN skipped).
    pub fn zeroth_max(&self) -> f64 {
        match &self.zeroth {
            Zeroth::Constant(c) => *c,
            Zeroth::Field(f) => f.iter().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, |m, &v| m.max(v)),
        }
    }

    /// Second-order part `F~(x, M)`; `p_hat` is only used by the q-trace kind.
    pub fn tilde(&self, node: usize, m: &SymMat2, p_hat: [f64; 2]) -> f64 {
        match self.kind {
            OperatorKind::PucciPlus => pucci_eval(m, self.a_min, self.a_max, PucciSign::Plus),
            OperatorKind::PucciMinus => pucci_eval(m, self.a_min, self.a_max, PucciSign::Minus),
            OperatorKind::Linear => self.coefficients_at(node).frobenius(m),
            OperatorKind::QTrace => m.trace() + self.q * m.quad(p_hat),
        }
    }
}

/// `(|p|^2 + delta^2)^(alpha/2)`, exactly 1 when `alpha = 0`.
#[inline]
pub(crate) fn gradient_weight(alpha: f64, p: [f64; 2], delta: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        math::pow(p[0] * p[0] + p[1] * p[1] + delta * delta, 0.5 * alpha)
    }
}

/// Pointwise `(|p|^2+delta^2)^(alpha/2) (F~(x, M) + h(x).p)` at grid node `node`.
pub fn evaluate_f(spec: &OperatorSpec, node: usize, p: [f64; 2], m: &SymMat2, delta: f64) -> Result<f64> {
    let s2 = p[0] * p[0] + p[1] * p[1] + delta * delta;
    if s2 == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    let norm = math::sqrt(s2);
    let p_hat = [p[0] / norm, p[1] / norm];
    let h = spec.drift_at(node);
    let inner = spec.tilde(node, m, p_hat) + h[0] * p[0] + h[1] * p[1];
    Ok(gradient_weight(spec.alpha, p, delta) * inner)
}

/// Residual `F_h[u]` of the monotone scheme on interior nodes; zero on the
/// boundary, sentinel outside.
pub fn discretize_residual(
    spec: &OperatorSpec,
    g: &Grid,
    u: &ScalarField,
    delta: f64,
    stencil_order: usize,
) -> Result<ScalarField> {
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig("discretize_residual needs delta > 0".into()));
    }
    u.check(g)?;
    let scheme = Scheme::new(spec, g, stencil_order)?;
    let mut out = ScalarField::zeros(g);
    for &i in g.interior() {
        out.set(i, scheme.residual_at(u.values(), i, delta));
    }
    Ok(out)
}

/// Stencil directions `(dx, dy)`: the two axes, then the two diagonals.
pub(crate) const DIRS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];
const DIR_LEN2: [f64; 4] = [1.0, 1.0, 2.0, 2.0];

/// Per-direction coefficients of a linear difference operator
/// `sum_d k[d] D_d u`.
pub(crate) type Coeffs = [f64; 4];

/// One row of `L v = sum_d k_d D_d v + h.grad_upwind v`, written as
/// `center * v_i + sum_j w_j v_j` with `w_j >= 0`.
pub(crate) struct Row {
    pub center: f64,
    pub len: usize,
    pub nb: [(usize, f64); 12],
}

impl Row {
    #[inline]
    pub fn apply(&self, v: &[f64], i: usize) -> f64 {
        let mut s = self.center * v[i];
        for &(j, w) in &self.nb[..self.len] {
            s += w * v[j];
        }
        s
    }

    /// `sum_j w_j v_j`, the off-centre part.
    #[inline]
    pub fn neighbours(&self, v: &[f64]) -> f64 {
        self.nb[..self.len].iter().map(|&(j, w)| w * v[j]).sum()
    }
}

/// The wide-stencil discretization of one operator on one grid.
pub(crate) struct Scheme<'a> {
    pub spec: &'a OperatorSpec,
    pub grid: &'a Grid,
    ndirs: usize,
    offsets: [isize; 4],
    inv_h2: [f64; 4],
    inv_h: f64,
    one_d: bool,
}

impl<'a> Scheme<'a> {
    pub fn new(spec: &'a OperatorSpec, grid: &'a Grid, order: usize) -> Result<Self> {
        if order != 1 && order != 2 {
            return Err(Error::InvalidConfig(format!("stencil order {order} not in {{1, 2}}")));
        }
        spec.validate_for(grid)?;
        let one_d = grid.dimension() == 1;
        let ndirs = if one_d { 1 } else if order == 1 { 2 } else { 4 };
        let nx = grid.nx() as isize;
        let h = grid.h();
        let mut offsets = [0isize; 4];
        let mut inv_h2 = [0.0; 4];
        for d in 0..4 {
            offsets[d] = DIRS[d].1 * nx + DIRS[d].0;
            inv_h2[d] = 1.0 / (DIR_LEN2[d] * h * h);
        }
        let s = Scheme { spec, grid, ndirs, offsets, inv_h2, inv_h: 1.0 / h, one_d };
        if spec.kind == OperatorKind::Linear {
            for &i in grid.interior() {
                let m = spec.coefficients_at(i);
                if ndirs == 2 && m.m12 != 0.0 {
                    return Err(Error::InvalidOperator(
                        "axis-only stencil cannot represent off-diagonal coefficients".into(),
                    ));
                }
                if ndirs == 4 && (m.m11 < math::abs(m.m12) || m.m22 < math::abs(m.m12)) {
                    return Err(Error::InvalidOperator(format!(
                        "coefficient matrix at node {i} is not diagonally dominant; the stencil would not be monotone"
                    )));
                }
            }
        }
        Ok(s)
    }

    #[inline]
    pub fn second_diffs(&self, u: &[f64], i: usize) -> [f64; 4] {
        let mut d2 = [0.0; 4];
        for d in 0..self.ndirs {
            let o = self.offsets[d];
            let (up, dn) = (u[(i as isize + o) as usize], u[(i as isize - o) as usize]);
            d2[d] = (up + dn - 2.0 * u[i]) * self.inv_h2[d];
        }
        d2
    }

    /// Central-difference gradient.
    #[inline]
    pub fn gradient(&self, u: &[f64], i: usize) -> [f64; 2] {
        let half = 0.5 * self.inv_h;
        let gx = (u[i + 1] - u[i - 1]) * half;
        if self.one_d {
            [gx, 0.0]
        } else {
            let nx = self.grid.nx();
            [gx, (u[i + nx] - u[i - nx]) * half]
        }
    }

    #[inline]
    fn drift(&self, i: usize) -> [f64; 2] {
        let h = self.spec.drift_at(i);
        if self.one_d {
            [h[0], 0.0]
        } else {
            h
        }
    }

    /// Upwind `h . grad u`.
    #[inline]
    pub fn drift_term(&self, u: &[f64], i: usize) -> f64 {
        let h = self.drift(i);
        let mut s = 0.0;
        for (c, off) in [(0usize, 1isize), (1, self.grid.nx() as isize)] {
            if h[c] > 0.0 {
                s += h[c] * (u[(i as isize + off) as usize] - u[i]) * self.inv_h;
            } else if h[c] < 0.0 {
                s += h[c] * (u[i] - u[(i as isize - off) as usize]) * self.inv_h;
            }
        }
        s
    }

    #[inline]
    pub fn weight(&self, p: [f64; 2], delta: f64) -> f64 {
        gradient_weight(self.spec.alpha, p, delta)
    }

    /// Whether the Pucci optimisation is a max (true) or a min (false).
    #[inline]
    pub fn is_max_type(&self) -> bool {
        self.spec.kind != OperatorKind::PucciMinus
    }

    pub fn is_pucci(&self) -> bool {
        matches!(self.spec.kind, OperatorKind::PucciPlus | OperatorKind::PucciMinus)
    }

    fn frames(&self) -> &'static [[usize; 2]] {
        const ONE: [[usize; 2]; 1] = [[0, usize::MAX]];
        const AXES: [[usize; 2]; 1] = [[0, 1]];
        const BOTH: [[usize; 2]; 2] = [[0, 1], [2, 3]];
        match self.ndirs {
            1 => &ONE,
            2 => &AXES,
            _ => &BOTH,
        }
    }

    #[inline]
    fn slope(&self, e: f64) -> f64 {
        let (a, big_a) = (self.spec.a_min, self.spec.a_max);
        match (self.spec.kind, e >= 0.0) {
            (OperatorKind::PucciMinus, true) => a,
            (OperatorKind::PucciMinus, false) => big_a,
            (_, true) => big_a,
            (_, false) => a,
        }
    }

    /// Optimal frame and slopes for the Pucci kinds. Ties keep the lowest
    /// frame index.
    fn pucci_choice(&self, d2: &[f64; 4]) -> (f64, Coeffs) {
        let max_type = self.is_max_type();
        let mut best = (0.0, [0.0; 4]);
        for (f, frame) in self.frames().iter().enumerate() {
            let mut k = [0.0; 4];
            let mut value = 0.0;
            for &d in frame.iter().filter(|&&d| d != usize::MAX) {
                k[d] = self.slope(d2[d]);
                value += k[d] * d2[d];
            }
            let better = if max_type { value > best.0 } else { value < best.0 };
            if f == 0 || better {
                best = (value, k);
            }
        }
        best
    }

    /// Fixed coefficients for the linear and q-trace kinds.
    pub fn fixed_coeffs(&self, i: usize, p: [f64; 2], delta: f64) -> Coeffs {
        let m = match self.spec.kind {
            OperatorKind::Linear => self.spec.coefficients_at(i),
            OperatorKind::QTrace => {
                let norm = math::sqrt(p[0] * p[0] + p[1] * p[1] + delta * delta);
                let ph = if norm > 0.0 { [p[0] / norm, p[1] / norm] } else { [0.0, 0.0] };
                let q = self.spec.q;
                let (b11, b22) = (1.0 + q * ph[0] * ph[0], 1.0 + q * ph[1] * ph[1]);
                let cap = b11.min(b22);
                let b12 = (q * ph[0] * ph[1]).clamp(-cap, cap);
                SymMat2::new(b11, b12, b22)
            }
            _ => unreachable!("fixed coefficients requested for a Pucci operator"),
        };
        match self.ndirs {
            1 => [m.m11, 0.0, 0.0, 0.0],
            2 => [m.m11, m.m22, 0.0, 0.0],
            _ if m.m12 >= 0.0 => [m.m11 - m.m12, m.m22 - m.m12, 2.0 * m.m12, 0.0],
            _ => [m.m11 + m.m12, m.m22 + m.m12, 0.0, -2.0 * m.m12],
        }
    }

    /// Coefficients of the linear operator selected at node `i`.
    pub fn optimal_coeffs(&self, u: &[f64], i: usize, p: [f64; 2], delta: f64) -> Coeffs {
        if self.is_pucci() {
            self.pucci_choice(&self.second_diffs(u, i)).1
        } else {
            self.fixed_coeffs(i, p, delta)
        }
    }

    /// `F~_h[u]` at node `i`.
    pub fn tilde(&self, u: &[f64], i: usize, p: [f64; 2], delta: f64) -> f64 {
        let d2 = self.second_diffs(u, i);
        if self.is_pucci() {
            self.pucci_choice(&d2).0
        } else {
            let k = self.fixed_coeffs(i, p, delta);
            (0..self.ndirs).map(|d| k[d] * d2[d]).sum()
        }
    }

    /// Full residual `F_h[u]` at node `i`.
    pub fn residual_at(&self, u: &[f64], i: usize, delta: f64) -> f64 {
        let p = self.gradient(u, i);
        self.weight(p, delta) * (self.tilde(u, i, p, delta) + self.drift_term(u, i))
    }

    /// All candidate coefficient vectors at node `i`; returns the count.
    pub fn candidates(&self, i: usize, p: [f64; 2], delta: f64, out: &mut [Coeffs; 8]) -> usize {
        if !self.is_pucci() {
            out[0] = self.fixed_coeffs(i, p, delta);
            return 1;
        }
        let (a, big_a) = (self.spec.a_min, self.spec.a_max);
        let mut n = 0;
        for frame in self.frames() {
            let dirs: Vec<usize> = frame.iter().copied().filter(|&d| d != usize::MAX).collect();
            for mask in 0..(1usize << dirs.len()) {
                let mut k = [0.0; 4];
                for (b, &d) in dirs.iter().enumerate() {
                    k[d] = if mask >> b & 1 == 1 { big_a } else { a };
                }
                out[n] = k;
                n += 1;
            }
        }
        n
    }

    /// Row of the linear operator with coefficients `k` plus upwind drift.
    pub fn row(&self, i: usize, k: &Coeffs) -> Row {
        let mut row = Row { center: 0.0, len: 0, nb: [(0, 0.0); 12] };
        for d in 0..self.ndirs {
            let w = k[d] * self.inv_h2[d];
            if w == 0.0 {
                continue;
            }
            let o = self.offsets[d];
            row.nb[row.len] = ((i as isize + o) as usize, w);
            row.nb[row.len + 1] = ((i as isize - o) as usize, w);
            row.len += 2;
            row.center -= 2.0 * w;
        }
        let h = self.drift(i);
        for (c, off) in [(0usize, 1isize), (1, self.grid.nx() as isize)] {
            let w = math::abs(h[c]) * self.inv_h;
            if w == 0.0 {
                continue;
            }
            let j = if h[c] > 0.0 { i as isize + off } else { i as isize - off };
            row.nb[row.len] = (j as usize, w);
            row.len += 1;
            row.center -= w;
        }
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainSpec};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        math::abs(a - b) <= tol * (1.0 + math::abs(b))
    }

    #[test]
    fn pucci_examples() {
        assert_eq!(pucci_eval(&SymMat2::diag(1.0, -1.0), 1.0, 2.0, PucciSign::Plus), 1.0);
        assert_eq!(pucci_eval(&SymMat2::identity(), 1.0, 2.0, PucciSign::Plus), 4.0);
        assert_eq!(pucci_eval(&SymMat2::identity(), 1.0, 2.0, PucciSign::Minus), 2.0);
    }

    #[test]
    fn evaluate_examples() {
        let s = OperatorSpec::pucci_plus(1.0, 2.0, -0.5);
        let m = SymMat2::diag(1.0, -1.0);
        assert!(close(evaluate_f(&s, 0, [1.0, 0.0], &m, 0.0).unwrap(), 1.0, 1e-15));
        assert!(close(evaluate_f(&s, 0, [4.0, 0.0], &m, 0.0).unwrap(), 0.5, 1e-15));
        let q = OperatorSpec::qtrace(1.0, 0.0);
        assert_eq!(evaluate_f(&q, 0, [1.0, 0.0], &SymMat2::diag(2.0, 3.0), 0.0).unwrap(), 7.0);
        assert_eq!(evaluate_f(&s, 0, [0.0, 0.0], &m, 0.0), Err(Error::SingularEvaluation));
    }

    #[test]
    fn validation() {
        assert!(OperatorSpec::pucci_plus(2.0, 1.0, 0.0).validate().is_err());
        assert!(OperatorSpec::pucci_plus(1.0, 2.0, -1.0).validate().is_err());
        assert!(OperatorSpec::pucci_plus(1.0, 2.0, 0.1).validate().is_err());
        assert!(OperatorSpec::qtrace(-1.0, 0.0).validate().is_err());
        let c = Coefficients::Constant(SymMat2::diag(1.0, 3.0));
        assert!(OperatorSpec::linear(c.clone(), 1.0, 2.0, 0.0).is_err());
        assert!(OperatorSpec::linear(c, 1.0, 3.0, 0.0).is_ok());
    }

    #[test]
    fn residual_exact_on_diagonal_quadratics() {
        let g = build_domain(&DomainSpec::square(1.0), 16).unwrap();
        let m = SymMat2::diag(1.5, -0.7);
        let u = ScalarField::from_fn(&g, |p| 0.5 * m.quad(p));
        for kind in [OperatorKind::PucciPlus, OperatorKind::PucciMinus] {
            let mut s = OperatorSpec::pucci_plus(1.0, 2.0, 0.0);
            s.kind = kind;
            let r = discretize_residual(&s, &g, &u, 1e-3, 2).unwrap();
            let want = s.tilde(0, &m, [0.0, 0.0]);
            for &i in g.interior() {
                assert!(close(r.get(i), want, 1e-9), "{} vs {want}", r.get(i));
            }
        }
    }

    #[test]
    fn residual_vanishes_on_affine() {
        let g = build_domain(&DomainSpec::disk(1.0), 20).unwrap();
        let u = ScalarField::from_fn(&g, |p| 0.3 + 2.0 * p[0] - p[1]);
        let s = OperatorSpec::pucci_minus(1.0, 3.0, -0.5);
        let r = discretize_residual(&s, &g, &u, 0.1, 2).unwrap();
        assert!(r.sup_norm() < 1e-9);
        let z = discretize_residual(&s, &g, &ScalarField::zeros(&g), 0.1, 2).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
    }

    #[test]
    fn linear_kind_exact_on_quadratics() {
        let a = SymMat2::new(2.0, -0.5, 1.0);
        let s = OperatorSpec::linear(Coefficients::Constant(a), 0.5, 2.5, 0.0).unwrap();
        let g = build_domain(&DomainSpec::square(1.0), 10).unwrap();
        let m = SymMat2::new(0.3, 1.1, -2.0);
        let u = ScalarField::from_fn(&g, |p| 0.5 * m.quad(p));
        let r = discretize_residual(&s, &g, &u, 1.0, 2).unwrap();
        for &i in g.interior() {
            assert!(close(r.get(i), a.frobenius(&m), 1e-9));
        }
    }

    #[test]
    fn axis_stencil_rejects_cross_terms() {
        let a = SymMat2::new(2.0, 0.5, 1.0);
        let s = OperatorSpec::linear(Coefficients::Constant(a), 0.5, 2.5, 0.0).unwrap();
        let g = build_domain(&DomainSpec::square(1.0), 10).unwrap();
        assert!(Scheme::new(&s, &g, 1).is_err());
        assert!(Scheme::new(&s, &g, 2).is_ok());
        assert!(Scheme::new(&s, &g, 3).is_err());
    }

    #[test]
    fn row_reproduces_tilde_for_selected_policy() {
        let g = build_domain(&DomainSpec::disk(1.0), 24).unwrap();
        let s = OperatorSpec::pucci_plus(1.0, 2.0, 0.0).with_drift(Drift::Constant([0.5, -1.0]));
        let scheme = Scheme::new(&s, &g, 2).unwrap();
        let u = ScalarField::from_fn(&g, |p| math::sin(3.0 * p[0]) * math::cos(2.0 * p[1]));
        let v = u.values();
        for &i in g.interior() {
            let p = scheme.gradient(v, i);
            let k = scheme.optimal_coeffs(v, i, p, 0.1);
            let lhs = scheme.row(i, &k).apply(v, i);
            let rhs = scheme.tilde(v, i, p, 0.1) + scheme.drift_term(v, i);
            assert!(close(lhs, rhs, 1e-10));
        }
    }
}
