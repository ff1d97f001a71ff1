//! Deterministic reductions and Krylov solvers on CSR matrices.
//!
//! Every reduction is computed as an ordered parallel map followed by a
//! sequential pairwise sum, so results do not depend on the thread count.

use rayon::prelude::*;
use sprs::CsMat;

use crate::error::{Result, TubeError};

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prod: Vec<f64> = a.par_iter().zip(b.par_iter()).map(|(x, y)| x * y).collect();
    pairwise_sum(&prod)
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y = A x`, one row per task.
pub fn spmv(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    debug_assert!(a.is_csr());
    (0..a.rows())
        .into_par_iter()
        .map(|i| {
            let row = a.outer_view(i).expect("row in range");
            row.iter().map(|(j, v)| v * x[j]).sum()
        })
        .collect()
}

pub fn diagonal(a: &CsMat<f64>) -> Vec<f64> {
    (0..a.rows())
        .map(|i| a.get(i, i).copied().unwrap_or(0.0))
        .collect()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Euclidean projection onto the orthogonal complement of `m`.
#[derive(Debug, Clone)]
pub struct Deflation {
    m: Vec<f64>,
    m2: f64,
}

impl Deflation {
    pub fn new(m: Vec<f64>) -> Self {
        let m2 = dot(&m, &m);
        Self { m, m2 }
    }

    pub fn apply(&self, x: &mut [f64]) {
        if self.m2 == 0.0 {
            return;
        }
        let c = dot(&self.m, x) / self.m2;
        axpy(x, -c, &self.m);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final residual relative to the right-hand side.
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// semi-definite `A`, restricted to the complement of `deflation` when given.
/// The right-hand side is projected first; every iterate stays projected.
pub fn pcg(
    a: &CsMat<f64>,
    rhs: &[f64],
    deflation: Option<&Deflation>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = rhs.len();
    let project = |v: &mut Vec<f64>| {
        if let Some(d) = deflation {
            d.apply(v);
        }
    };
    let inv_diag: Vec<f64> = diagonal(a).iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precondition = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        project(&mut z);
        z
    };

    let mut r = rhs.to_vec();
    project(&mut r);
    let bnorm = norm(&r);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, residual: 0.0 }));
    }
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    for it in 1..=max_iter {
        let mut ap = spmv(a, &p);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(TubeError::NoConvergence { iterations: it, residual });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        project(&mut x);
        residual = norm(&r) / bnorm;
        if residual <= tol {
            return Ok((x, SolveStats { iterations: it, residual }));
        }
        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(TubeError::NoConvergence { iterations: max_iter, residual })
}

/// Jacobi-preconditioned BiCGSTAB for general nonsingular `A`.
pub fn bicgstab(a: &CsMat<f64>, rhs: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let n = rhs.len();
    let inv_diag: Vec<f64> = diagonal(a).iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precondition = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(v, d)| v * d).collect() };

    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, residual: 0.0 }));
    }
    let mut r = rhs.to_vec();
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut residual = 1.0;
    for it in 1..=max_iter {
        let rho_next = dot(&r_hat, &r);
        if rho_next == 0.0 || omega == 0.0 {
            return Err(TubeError::NoConvergence { iterations: it, residual });
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        p.par_iter_mut()
            .zip(r.par_iter().zip(v.par_iter()))
            .for_each(|(pi, (ri, vi))| *pi = ri + beta * (*pi - omega * vi));
        let p_hat = precondition(&p);
        v = spmv(a, &p_hat);
        alpha = rho / dot(&r_hat, &v);
        let mut s = r.clone();
        axpy(&mut s, -alpha, &v);
        axpy(&mut x, alpha, &p_hat);
        residual = norm(&s) / bnorm;
        if residual <= tol {
            return Ok((x, SolveStats { iterations: it, residual }));
        }
        let s_hat = precondition(&s);
        let t = spmv(a, &s_hat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        axpy(&mut x, omega, &s_hat);
        r = s;
        axpy(&mut r, -omega, &t);
        residual = norm(&r) / bnorm;
        if residual <= tol {
            return Ok((x, SolveStats { iterations: it, residual }));
        }
    }
    Err(TubeError::NoConvergence { iterations: max_iter, residual })
}
