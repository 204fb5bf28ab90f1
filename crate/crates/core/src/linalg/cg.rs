use crate::error::{Error, Result};

use super::SparseSymMatrix;

/// Default relative residual tolerance of [`reference_solve`].
pub const REFERENCE_TOL: f64 = 1e-12;

/// Unpreconditioned CG to a relative residual of [`REFERENCE_TOL`]. Only
/// used as an oracle and for error reporting.
pub fn reference_solve(a: &SparseSymMatrix, f: &[f64]) -> Result<Vec<f64>> {
    reference_solve_with_tol(a, f, REFERENCE_TOL)
}

/// Unpreconditioned CG until `||f - A x|| <= tol ||f||`, capped at `10 n`
/// iterations.
pub fn reference_solve_with_tol(a: &SparseSymMatrix, f: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = a.dim();
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: f.len(),
        });
    }
    let mut x = vec![0.0; n];
    let fnorm = super::norm2(f);
    if fnorm == 0.0 {
        return Ok(x);
    }
    let mut r = f.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = super::dot(&r, &r);
    let max_iter = 10 * n.max(1);
    for it in 0..max_iter {
        a.spmv_into(&p, &mut ap);
        let alpha = rr / super::dot(&p, &ap);
        super::axpy(alpha, &p, &mut x);
        super::axpy(-alpha, &ap, &mut r);
        let rr_new = super::dot(&r, &r);
        if rr_new.sqrt() <= tol * fnorm {
            // confirm on the true residual
            let true_r = a.residual(f, &x)?;
            let rel = super::norm2(&true_r) / fnorm;
            if rel <= tol {
                return Ok(x);
            }
            r = true_r;
            rr = super::dot(&r, &r);
            p.copy_from_slice(&r);
            continue;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        if it + 1 == max_iter {
            break;
        }
    }
    let rel = super::norm2(&a.residual(f, &x)?) / fnorm;
    Err(Error::ReferenceNotConverged {
        iterations: max_iter,
        relative_residual: rel,
    })
}
