//! Dense and sparse kernels used by every other module.

mod cg;
mod cholesky;
mod dense;
mod eigen;
mod sparse;

pub use cg::{reference_solve, reference_solve_with_tol, REFERENCE_TOL};
pub use cholesky::{factorize, Factorization, ScaledFactorization, DEFAULT_PIVOT_TOL};
pub use dense::{DenseMatrix, DenseSymMatrix};
pub use eigen::{sym_gen_eig, sym_gen_eig_below, GenEig};
pub use sparse::{CsrMatrix, SparseSymMatrix};

/// Euclidean inner product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four partial sums keep the loop vectorizable
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let o = 4 * c;
        acc[0] += a[o] * b[o];
        acc[1] += a[o + 1] * b[o + 1];
        acc[2] += a[o + 2] * b[o + 2];
        acc[3] += a[o + 3] * b[o + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for o in 4 * chunks..a.len() {
        s += a[o] * b[o];
    }
    s
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Largest absolute entry.
pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Gathers `x[indices]`.
pub fn restrict(x: &[f64], indices: &[usize]) -> Vec<f64> {
    indices.iter().map(|&g| x[g]).collect()
}

/// Scatters `local` into `global` at `indices`, adding `alpha * local`.
pub fn prolongate_add(alpha: f64, local: &[f64], indices: &[usize], global: &mut [f64]) {
    debug_assert_eq!(local.len(), indices.len());
    for (&g, v) in indices.iter().zip(local) {
        global[g] += alpha * v;
    }
}
