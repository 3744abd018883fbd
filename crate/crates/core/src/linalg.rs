//! Dense symmetric positive-definite solvers.
//!
//! Storage and products come from `nalgebra`; the factorization and the
//! Krylov iteration are written out here so that the pivot threshold and
//! the convergence criterion are explicit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factors a symmetric matrix, reading only its lower triangle.
    ///
    /// A pivot not exceeding `n · ε · max|Aᵢᵢ|` is treated as singular.
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Shape(format!(
                "cholesky needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
        let floor = n as f64 * f64::EPSILON * max_diag;

        // Left-looking, column-major: every update is an axpy over a
        // contiguous column segment.
        let mut l = DMatrix::<f64>::zeros(n, n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            for i in j..n {
                col[i] = a[(i, j)];
            }
            for k in 0..j {
                let ljk = l[(j, k)];
                if ljk == 0.0 {
                    continue;
                }
                let src = &l.as_slice()[k * n + j..k * n + n];
                for (c, &s) in col[j..].iter_mut().zip(src) {
                    *c -= ljk * s;
                }
            }
            let pivot = col[j];
            if !(pivot > floor) || !pivot.is_finite() {
                return Err(Error::Solver(format!(
                    "matrix is not positive definite (pivot {pivot:e} at column {j})"
                )));
            }
            let d = pivot.sqrt();
            let dst = &mut l.as_mut_slice()[j * n + j..j * n + n];
            dst[0] = d;
            for (t, &c) in dst[1..].iter_mut().zip(&col[j + 1..]) {
                *t = c / d;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor_ref(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.l.nrows();
        let ls = self.l.as_slice();
        // L z = b
        for j in 0..n {
            let zj = b[j] / ls[j * n + j];
            b[j] = zj;
            if zj != 0.0 {
                for (bi, &lij) in b[j + 1..].iter_mut().zip(&ls[j * n + j + 1..j * n + n]) {
                    *bi -= lij * zj;
                }
            }
        }
        // Lᵀ x = z
        for j in (0..n).rev() {
            let col = &ls[j * n + j + 1..j * n + n];
            let dot: f64 = col.iter().zip(&b[j + 1..]).map(|(l, x)| l * x).sum();
            b[j] = (b[j] - dot) / ls[j * n + j];
        }
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        let n = x.nrows();
        for c in 0..x.ncols() {
            self.solve_in_place(&mut x.as_mut_slice()[c * n..(c + 1) * n]);
        }
        x
    }
}

/// Result of a conjugate-gradient solve over all right-hand sides.
#[derive(Clone, Debug)]
pub struct CgSolution {
    pub x: DMatrix<f64>,
    /// Largest iteration count over the columns.
    pub iterations: usize,
    /// Largest final relative residual over the columns.
    pub residual: f64,
}

/// Conjugate gradient on each column of `b`, stopping when
/// `‖r‖ ≤ tol · ‖b‖`. A zero right-hand side yields a zero column.
pub fn conjugate_gradient(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Shape(format!(
            "cg: {}x{} system with {}-row right-hand side",
            n,
            a.ncols(),
            b.nrows()
        )));
    }
    let mut x = DMatrix::<f64>::zeros(n, b.ncols());
    let mut worst_iters = 0;
    let mut worst_res: f64 = 0.0;
    for c in 0..b.ncols() {
        let rhs = b.column(c).into_owned();
        let b_norm = rhs.norm();
        if b_norm == 0.0 {
            continue;
        }
        let mut xc = DVector::<f64>::zeros(n);
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut rr = r.dot(&r);
        let mut iters = 0;
        let mut rel = rr.sqrt() / b_norm;
        while rel > tol {
            if iters >= max_iter {
                return Err(Error::Convergence {
                    iterations: iters,
                    residual: rel,
                });
            }
            let ap = a * &p;
            let pap = p.dot(&ap);
            if !(pap > 0.0) {
                return Err(Error::Solver(format!(
                    "cg: non-positive curvature {pap:e} at iteration {iters}"
                )));
            }
            let alpha = rr / pap;
            xc.axpy(alpha, &p, 1.0);
            r.axpy(-alpha, &ap, 1.0);
            let rr_next = r.dot(&r);
            p = &r + (rr_next / rr) * p;
            rr = rr_next;
            iters += 1;
            rel = rr.sqrt() / b_norm;
        }
        x.set_column(c, &xc);
        worst_iters = worst_iters.max(iters);
        worst_res = worst_res.max(rel);
    }
    Ok(CgSolution {
        x,
        iterations: worst_iters,
        residual: worst_res,
    })
}
