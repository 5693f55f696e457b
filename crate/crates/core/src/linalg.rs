//! Sparse linear algebra for the inner policy solves: CSR storage, ILU(0),
//! right-preconditioned BiCGSTAB and a tridiagonal direct solver.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Csr { n, row_ptr, col: Vec::with_capacity(nnz), val: Vec::with_capacity(nnz) }
    }

    /// Appends a row given as unsorted `(column, value)` pairs; duplicate
    /// columns are summed.
    pub fn push_row(&mut self, entries: &mut [(usize, f64)]) {
        entries.sort_unstable_by_key(|e| e.0);
        let mut last = usize::MAX;
        for &(c, v) in entries.iter() {
            if c == last {
                *self.val.last_mut().unwrap() += v;
            } else {
                self.col.push(c);
                self.val.push(v);
                last = c;
            }
        }
        self.row_ptr.push(self.col.len());
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
pub(crate) struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &Csr) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.col[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Internal("ILU(0): missing diagonal entry".into()));
            }
        }
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for kk in start..end {
                let k = lu.col[kk];
                if k >= i {
                    break;
                }
                let pivot = lu.val[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Internal("ILU(0): zero pivot".into()));
                }
                let lik = lu.val[kk] / pivot;
                lu.val[kk] = lik;
                // Row i (from kk+1) minus lik times the upper part of row k.
                let mut p = kk + 1;
                let mut q = diag[k] + 1;
                let q_end = lu.row_ptr[k + 1];
                while p < end && q < q_end {
                    let (cp, cq) = (lu.col[p], lu.col[q]);
                    if cp == cq {
                        lu.val[p] -= lik * lu.val[q];
                        p += 1;
                        q += 1;
                    } else if cp < cq {
                        p += 1;
                    } else {
                        q += 1;
                    }
                }
            }
            if lu.val[diag[i]] == 0.0 {
                return Err(Error::Internal("ILU(0): zero pivot".into()));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = b[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.val[k] * x[lu.col[k]];
            }
            x[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.val[k] * x[lu.col[k]];
            }
            x[i] = s / lu.val[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// Solves `a x = b` with ILU(0)-preconditioned BiCGSTAB, starting from `x`.
/// Stops when the 2-norm residual is at most `rtol * |b|`. Returns the
/// iteration count.
pub(crate) fn bicgstab(a: &Csr, b: &[f64], x: &mut [f64], rtol: f64, max_iter: usize) -> Result<usize> {
    let n = a.n;
    let pre = Ilu0::new(a)?;
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let tol = rtol * bnorm;
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm2(&r) <= tol {
        return Ok(0);
    }
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut res = f64::INFINITY;
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() || omega == 0.0 {
            // Breakdown: restart the shadow residual.
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut y);
        a.matvec(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            omega = 1.0;
            continue;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(it);
        }
        pre.apply(&s, &mut z);
        a.matvec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm2(&r);
        if res <= tol {
            return Ok(it);
        }
    }
    Err(Error::InnerSolve { iterations: max_iter, residual: res / bnorm })
}

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
pub(crate) fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Internal("tridiagonal solve: zero pivot".into()));
    }
    c[0] = if n > 1 { sup[0] / beta } else { 0.0 };
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - sub[i] * c[i - 1];
        if beta == 0.0 {
            return Err(Error::Internal("tridiagonal solve: zero pivot".into()));
        }
        c[i] = if i + 1 < n { sup[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / beta;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}
