//! Shooting oracles for 1D and radial problems.
//!
//! The equations are rewritten in the flux variable `w = |u'|^alpha u'`,
//! which removes the gradient singularity:
//!
//! ```text
//! u' = sign(w) |w|^(1/(1+alpha))
//! w' = (1+alpha) phi^-1( rhs - (N-1) phi(w/r) )
//! ```
//!
//! where `phi(e)` is the Pucci slope function (`A e+ - a e-` or
//! `a e+ - A e-`). Integration is an adaptive Dormand-Prince 5(4) scheme
//! that stops exactly at kinks of the right-hand side and at zeros of `u`.
//! Nothing here depends on the grid modules.

use alloc::format;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialKind {
    PucciPlus,
    PucciMinus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Interval { length: f64 },
    Disk { radius: f64 },
    Annulus { r_inner: f64, r_outer: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSpec {
    pub kind: RadialKind,
    pub a: f64,
    pub big_a: f64,
    pub alpha: f64,
    /// Constant zeroth-order coefficient.
    pub c: f64,
    pub geometry: Geometry,
    /// 1 for intervals, 2 for disks and annuli.
    pub dim: usize,
}

impl RadialSpec {
    pub fn interval(kind: RadialKind, a: f64, big_a: f64, alpha: f64, length: f64) -> Self {
        RadialSpec { kind, a, big_a, alpha, c: 0.0, geometry: Geometry::Interval { length }, dim: 1 }
    }

    pub fn disk(kind: RadialKind, a: f64, big_a: f64, alpha: f64, radius: f64) -> Self {
        RadialSpec { kind, a, big_a, alpha, c: 0.0, geometry: Geometry::Disk { radius }, dim: 2 }
    }

    pub fn annulus(kind: RadialKind, a: f64, big_a: f64, alpha: f64, r_inner: f64, r_outer: f64) -> Self {
        RadialSpec { kind, a, big_a, alpha, c: 0.0, geometry: Geometry::Annulus { r_inner, r_outer }, dim: 2 }
    }

    /// `|u'|^alpha u''` on `(0, length)`.
    pub fn laplacian_interval(alpha: f64, length: f64) -> Self {
        Self::interval(RadialKind::PucciPlus, 1.0, 1.0, alpha, length)
    }

    /// The operator `-F(-p, -M)`: plus and minus swap.
    pub fn reflected(&self) -> Self {
        let kind = match self.kind {
            RadialKind::PucciPlus => RadialKind::PucciMinus,
            RadialKind::PucciMinus => RadialKind::PucciPlus,
        };
        RadialSpec { kind, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("radial spec: {m}")));
        if !(self.a > 0.0 && self.a <= self.big_a && self.big_a.is_finite()) {
            return bad("need 0 < a <= A");
        }
        if !(self.alpha > -1.0 && self.alpha <= 0.0) {
            return bad("alpha outside (-1, 0]");
        }
        if !self.c.is_finite() {
            return bad("c must be finite");
        }
        match self.geometry {
            Geometry::Interval { length } if self.dim == 1 && length > 0.0 => Ok(()),
            Geometry::Disk { radius } if self.dim == 2 && radius > 0.0 => Ok(()),
            Geometry::Annulus { r_inner, r_outer } if self.dim == 2 && 0.0 < r_inner && r_inner < r_outer => Ok(()),
            _ => bad("geometry and dimension do not match or are degenerate"),
        }
    }

    #[inline]
    fn phi(&self, e: f64) -> f64 {
        let (up, down) = self.slopes();
        if e > 0.0 {
            up * e
        } else {
            down * e
        }
    }

    #[inline]
    fn phi_inv(&self, t: f64) -> f64 {
        let (up, down) = self.slopes();
        if t > 0.0 {
            t / up
        } else {
            t / down
        }
    }

    /// Slopes of `phi` on positive and negative arguments.
    fn slopes(&self) -> (f64, f64) {
        match self.kind {
            RadialKind::PucciPlus => (self.big_a, self.a),
            RadialKind::PucciMinus => (self.a, self.big_a),
        }
    }
}

/// `pi_p = 2 pi (p-1)^(1/p) / (p sin(pi/p))`.
pub fn pi_p(p: f64) -> f64 {
    let pi = core::f64::consts::PI;
    2.0 * pi * math::pow(p - 1.0, 1.0 / p) / (p * math::sin(pi / p))
}

/// First eigenvalue `(pi_p / L)^p`, `p = 2 + alpha`, of the divergence-form
/// p-Laplacian `(|u'|^alpha u')' + lambda |u|^alpha u = 0` on `(0, L)`.
pub fn p_laplacian_eig_1d(alpha: f64, length: f64) -> f64 {
    let p = 2.0 + alpha;
    math::pow(pi_p(p) / length, p)
}

/// First eigenvalue of `|u'|^alpha u'' + lambda |u|^alpha u = 0` on `(0, L)`.
/// Since `(|u'|^alpha u')' = (1+alpha)|u'|^alpha u''`, this is the
/// p-Laplacian value divided by `1 + alpha`.
pub fn closed_form_eig_1d(alpha: f64, length: f64) -> f64 {
    p_laplacian_eig_1d(alpha, length) / (1.0 + alpha)
}

/// Integrator tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        OdeTolerance { rtol: 1e-12, atol: 1e-14 }
    }
}

/// Flux-form right-hand side for `|u'|^alpha phi(u'') + (N-1)|u'|^alpha phi(u'/r) = g(u)`.
struct FluxSystem<'a, G: Fn(f64) -> f64> {
    rs: &'a RadialSpec,
    g: G,
    /// `w'(0)` used at `r = 0` for the disk.
    w_prime_at_origin: f64,
}

impl<G: Fn(f64) -> f64> FluxSystem<'_, G> {
    fn rhs(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        let rs = self.rs;
        let du = math::signed_pow(y[1], 1.0 / (1.0 + rs.alpha));
        if rs.dim == 2 && t == 0.0 {
            return [du, self.w_prime_at_origin];
        }
        let tangential = if rs.dim == 2 { (rs.dim - 1) as f64 * rs.phi(y[1] / t) } else { 0.0 };
        [du, (1.0 + rs.alpha) * rs.phi_inv((self.g)(y[0]) - tangential)]
    }

    /// Arguments whose sign selects a branch of `phi` or `phi^-1`.
    fn switches(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        let rs = self.rs;
        let tangential = if rs.dim == 2 && t > 0.0 { rs.phi(y[1] / t) } else { 0.0 };
        [(self.g)(y[0]) - tangential, y[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stop {
    End,
    Zero,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand-Prince step; returns the 5th-order solution and the error
/// estimate.
fn dp_step(f: &impl Fn(f64, [f64; 2]) -> [f64; 2], t: f64, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
    let mut k = [[0.0; 2]; 7];
    for s in 0..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][j] * kj[0];
            ys[1] += h * A[s][j] * kj[1];
        }
        k[s] = f(t + C[s] * h, ys);
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        let b = if s < 6 { A[6][s] } else { 0.0 };
        y5[0] += h * b * k[s][0];
        y5[1] += h * b * k[s][1];
        err[0] += h * E[s] * k[s][0];
        err[1] += h * E[s] * k[s][1];
    }
    (y5, err)
}

#[inline]
fn sign_change(a: f64, b: f64) -> bool {
    (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0)
}

/// Smallest fraction `theta` of the step at which `crossed(step(theta))`
/// becomes true, by bisection. Returns the right end of the final bracket.
fn locate(crossed: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if crossed(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    hi
}

/// Integrates from `t0` to `t_end`, or to the first zero of `u` after a
/// positive stretch when `stop_at_zero` is set.
fn integrate<G: Fn(f64) -> f64>(
    sys: &FluxSystem<'_, G>,
    t0: f64,
    y0: [f64; 2],
    t_end: f64,
    stop_at_zero: bool,
    tol: OdeTolerance,
) -> Result<(f64, [f64; 2], Stop)> {
    let f = |t: f64, y: [f64; 2]| sys.rhs(t, y);
    let span = t_end - t0;
    let mut t = t0;
    let mut y = y0;
    let mut h = 1e-3 * span;
    let floor = 1e-15 * span.max(1.0);
    let mut kinks = 0usize;
    while t < t_end {
        if h < floor {
            return Err(Error::StepFloor { t, step: h });
        }
        let h_try = h.min(t_end - t);
        let (y1, err) = dp_step(&f, t, y, h_try);
        let mut e: f64 = 0.0;
        for i in 0..2 {
            let sc = tol.atol + tol.rtol * math::abs(y[i]).max(math::abs(y1[i]));
            e = e.max(math::abs(err[i]) / sc);
        }
        if !e.is_finite() || e > 1.0 {
            let shrink = if e.is_finite() { (0.9 * math::pow(e, -0.2)).max(0.1) } else { 0.1 };
            h = h_try * shrink;
            continue;
        }
        let grow = if e > 0.0 { (0.9 * math::pow(e, -0.2)).min(5.0) } else { 5.0 };

        if stop_at_zero && y[0] > 0.0 && y1[0] <= 0.0 {
            let theta = locate(|th| dp_step(&f, t, y, th * h_try).0[0] <= 0.0);
            let (yz, _) = dp_step(&f, t, y, theta * h_try);
            // Final secant refinement inside the tiny bracket.
            let tz = t + theta * h_try;
            let slope = f(tz, yz)[0];
            let dt = if slope != 0.0 { -yz[0] / slope } else { 0.0 };
            return Ok((tz + dt, [0.0, yz[1]], Stop::Zero));
        }

        let (s0, s1) = (sys.switches(t, y), sys.switches(t + h_try, y1));
        if (0..2).any(|k| sign_change(s0[k], s1[k])) {
            let theta = locate(|th| {
                let tt = t + th * h_try;
                let sy = sys.switches(tt, dp_step(&f, t, y, th * h_try).0);
                (0..2).any(|k| sign_change(s0[k], sy[k]))
            });
            if theta < 1.0 {
                kinks += 1;
                if kinks > 10_000 {
                    return Err(Error::StepFloor { t, step: h_try });
                }
                let (yk, _) = dp_step(&f, t, y, theta * h_try);
                t += theta * h_try;
                y = yk;
                h = h_try;
                continue;
            }
        }
        t += h_try;
        y = y1;
        h = h_try * grow;
    }
    Ok((t_end, y, Stop::End))
}

/// Brent's method on a bracketing interval.
pub fn brent(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, xtol: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::ShootingWindow(format!("no sign change on [{a}, {b}]")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if math::abs(fc) < math::abs(fb) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * math::abs(b) + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if math::abs(xm) <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if math::abs(e) >= tol1 && math::abs(fa) > math::abs(fb) {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = math::abs(p);
            if 2.0 * p < (3.0 * xm * q - math::abs(tol1 * q)).min(math::abs(e * q)) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if math::abs(d) > tol1 { d } else { tol1 * xm.signum() };
        fb = f(b)?;
    }
    Ok(b)
}

/// Start of the shooting integration: position, state and the limit
/// `w'(0)` for the disk.
fn eigen_start(rs: &RadialSpec, mu: f64) -> (f64, [f64; 2], f64) {
    match rs.geometry {
        Geometry::Interval { .. } => (0.0, [0.0, 1.0], 0.0),
        Geometry::Annulus { r_inner, .. } => (r_inner, [0.0, 1.0], 0.0),
        Geometry::Disk { .. } => {
            // phi(s/(1+alpha)) + (N-1) phi(s) = -mu with s < 0.
            let (_, down) = rs.slopes();
            let n1 = (rs.dim - 1) as f64;
            let s = -mu / (down * (1.0 / (1.0 + rs.alpha) + n1));
            (0.0, [1.0, 0.0], s)
        }
    }
}

/// First zero of `u` after the start for the eigen equation with
/// coefficient `mu`, or `None` if there is none before `t_max`.
fn first_zero(rs: &RadialSpec, mu: f64, t_max: f64, tol: OdeTolerance) -> Result<Option<f64>> {
    let (t0, y0, s) = eigen_start(rs, mu);
    let alpha = rs.alpha;
    let sys = FluxSystem { rs, g: move |u: f64| -mu * math::signed_pow(u, 1.0 + alpha), w_prime_at_origin: s };
    let (t, _, stop) = integrate(&sys, t0, y0, t_max, true, tol)?;
    Ok((stop == Stop::Zero).then_some(t))
}

fn outer_length(rs: &RadialSpec) -> f64 {
    match rs.geometry {
        Geometry::Interval { length } => length,
        Geometry::Disk { radius } => radius,
        Geometry::Annulus { r_outer, .. } => r_outer,
    }
}

/// Principal eigenvalue on an interval by shooting.
pub fn shoot_eig_1d(rs: &RadialSpec) -> Result<f64> {
    shoot_eig_1d_with(rs, OdeTolerance::default())
}

pub fn shoot_eig_1d_with(rs: &RadialSpec, tol: OdeTolerance) -> Result<f64> {
    rs.validate()?;
    if !matches!(rs.geometry, Geometry::Interval { .. }) {
        return Err(Error::InvalidConfig("shoot_eig_1d needs an interval".into()));
    }
    shoot_scaled(rs, tol)
}

/// Principal eigenvalue on a disk or annulus by shooting.
pub fn shoot_eig_radial(rs: &RadialSpec) -> Result<f64> {
    shoot_eig_radial_with(rs, OdeTolerance::default())
}

pub fn shoot_eig_radial_with(rs: &RadialSpec, tol: OdeTolerance) -> Result<f64> {
    rs.validate()?;
    match rs.geometry {
        Geometry::Disk { .. } => shoot_scaled(rs, tol),
        Geometry::Annulus { r_inner, r_outer } => shoot_annulus(rs, r_inner, r_outer, tol),
        Geometry::Interval { .. } => Err(Error::InvalidConfig("shoot_eig_radial needs a disk or annulus".into())),
    }
}

/// Domains with a single length scale: shoot once at `mu = 1`, rescale,
/// then polish the root `z(mu) = L` with Brent.
fn shoot_scaled(rs: &RadialSpec, tol: OdeTolerance) -> Result<f64> {
    let l = outer_length(rs);
    let p = 2.0 + rs.alpha;
    let z1 = first_zero(rs, 1.0, 1e3, tol)?
        .ok_or_else(|| Error::ShootingWindow("no zero of the unit-coefficient solution".into()))?;
    let mu0 = math::pow(z1 / l, p);
    let window = 1e-6 * mu0;
    let g = |mu: f64| -> Result<f64> {
        Ok(first_zero(rs, mu, 4.0 * l, tol)?.unwrap_or(4.0 * l) - l)
    };
    let mu = brent(g, mu0 - window, mu0 + window, 1e-13 * mu0)
        .or_else(|_| brent(g, 0.5 * mu0, 2.0 * mu0, 1e-13 * mu0))?;
    Ok(mu - rs.c)
}

fn shoot_annulus(rs: &RadialSpec, r_inner: f64, r_outer: f64, tol: OdeTolerance) -> Result<f64> {
    let width = r_outer - r_inner;
    let t_max = r_inner + 4.0 * width;
    let g = |mu: f64| -> Result<f64> { Ok(first_zero(rs, mu, t_max, tol)?.unwrap_or(t_max) - r_outer) };
    // Guess from the interval of the same width, then widen to a bracket.
    let guess = rs.a * closed_form_eig_1d(rs.alpha, width);
    let (mut lo, mut hi) = (0.5 * guess, 2.0 * guess);
    let mut tries = 0;
    while g(lo)? <= 0.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 60 {
            return Err(Error::ShootingWindow("could not find a lower bracket".into()));
        }
    }
    while g(hi)? >= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::ShootingWindow("could not find an upper bracket".into()));
        }
    }
    let mu = brent(g, lo, hi, 1e-13 * hi)?;
    Ok(mu - rs.c)
}

/// Solution of `|u'|^alpha phi(u'') + c|u|^alpha u = f` on `(0, L)` with
/// zero boundary values, found by shooting on `w(0)`.
#[derive(Debug, Clone, Copy)]
pub struct DirichletProfile {
    rs: RadialSpec,
    f: f64,
    w0: f64,
    tol: OdeTolerance,
}

impl DirichletProfile {
    /// Initial flux `w(0) = |u'(0)|^alpha u'(0)`.
    pub fn initial_flux(&self) -> f64 {
        self.w0
    }

    /// `u(x)` for `x` in `[0, L]`.
    pub fn value(&self, x: f64) -> Result<f64> {
        let l = outer_length(&self.rs);
        if !(0.0..=l).contains(&x) {
            return Err(Error::InvalidConfig(format!("query point {x} outside [0, {l}]")));
        }
        if self.f == 0.0 || x == 0.0 {
            return Ok(0.0);
        }
        let sys = self.system();
        Ok(integrate(&sys, 0.0, [0.0, self.w0], x, false, self.tol)?.1[0])
    }

    fn system(&self) -> FluxSystem<'_, impl Fn(f64) -> f64> {
        let (c, f, alpha) = (self.rs.c, self.f, self.rs.alpha);
        FluxSystem { rs: &self.rs, g: move |u: f64| f - c * math::signed_pow(u, 1.0 + alpha), w_prime_at_origin: 0.0 }
    }
}

pub fn oracle_dirichlet_1d(rs: &RadialSpec, f: f64) -> Result<DirichletProfile> {
    oracle_dirichlet_1d_with(rs, f, OdeTolerance::default())
}

pub fn oracle_dirichlet_1d_with(rs: &RadialSpec, f: f64, tol: OdeTolerance) -> Result<DirichletProfile> {
    rs.validate()?;
    let l = match rs.geometry {
        Geometry::Interval { length } => length,
        _ => return Err(Error::InvalidConfig("oracle_dirichlet_1d needs an interval".into())),
    };
    if !(f <= 0.0) {
        return Err(Error::InvalidConfig("oracle_dirichlet_1d needs f <= 0".into()));
    }
    let mut prof = DirichletProfile { rs: *rs, f, w0: 0.0, tol };
    if f == 0.0 {
        return Ok(prof);
    }
    let end_value = |w0: f64| -> Result<f64> {
        let p = DirichletProfile { w0, ..prof };
        let sys = p.system();
        Ok(integrate(&sys, 0.0, [0.0, w0], l, false, tol)?.1[0])
    };
    let mut hi = 1.0;
    let mut tries = 0;
    while end_value(hi)? <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::ShootingWindow("no initial flux reaches u(L) > 0".into()));
        }
    }
    prof.w0 = brent(end_value, 0.0, hi, 1e-15 * hi)?;
    Ok(prof)
}
