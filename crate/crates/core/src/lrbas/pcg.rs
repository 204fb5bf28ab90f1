use crate::decomposition::{PartitionOfUnity, SchwarzOperators};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, restrict, SparseSymMatrix};

use super::{empty_bases, reduced_assemble, reduced_solve, DEFAULT_DROP_TOL};

/// Result of [`pcg`].
#[derive(Debug, Clone)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// relative true residual, starting with the initial guess
    pub residual_history: Vec<f64>,
    /// number of preconditioner applications
    pub applications: usize,
}

/// Preconditioned conjugate gradients from `x0`. Convergence is tested on
/// the recomputed residual `f - A x` after every step.
pub fn pcg<P>(
    a: &SparseSymMatrix,
    f: &[f64],
    mut precond: P,
    x0: &[f64],
    eps: f64,
    max_iter: usize,
) -> Result<PcgResult>
where
    P: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let nf = norm2(f);
    let rel = |r: &[f64]| if nf > 0.0 { norm2(r) / nf } else { norm2(r) };
    let mut x = x0.to_vec();
    let mut r = a.residual(f, &x)?;
    let mut history = vec![rel(&r)];
    let mut iterations = 0;
    let mut applications = 0;
    if history[0] <= eps {
        return Ok(PcgResult {
            x,
            iterations,
            residual_history: history,
            applications,
        });
    }
    let mut z = precond(&r)?;
    applications += 1;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; f.len()];
    loop {
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                solver: "PCG",
                problem: 0,
                iterations,
                relative_residual: *history.last().unwrap(),
            });
        }
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged {
                solver: "PCG",
                problem: 0,
                iterations,
                relative_residual: *history.last().unwrap(),
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        r = a.residual(f, &x)?;
        iterations += 1;
        history.push(rel(&r));
        if *history.last().unwrap() <= eps {
            break;
        }
        z = precond(&r)?;
        applications += 1;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(PcgResult {
        x,
        iterations,
        residual_history: history,
        applications,
    })
}

/// Initial guess from the span of previous solutions split by the
/// partition of unity: local bases `{D_i R_i x^(j)}` together with the
/// coarse space, Galerkin-projected for the current system.
pub fn pou_snapshot_guess(
    previous: &[Vec<f64>],
    ops: &SchwarzOperators,
    pou: &PartitionOfUnity,
) -> Result<Vec<f64>> {
    let dec = ops.decomposition();
    let mut bases = empty_bases(dec);
    for x in previous {
        if x.len() != ops.matrix().dim() {
            return Err(Error::DimensionMismatch {
                expected: ops.matrix().dim(),
                found: x.len(),
            });
        }
        for (i, b) in bases.iter_mut().enumerate() {
            let v: Vec<f64> = restrict(x, dec.dofs(i))
                .iter()
                .zip(pou.weights(i))
                .map(|(a, w)| a * w)
                .collect();
            b.try_append(&v, DEFAULT_DROP_TOL);
        }
    }
    let rs = reduced_assemble(ops, &bases)?;
    Ok(reduced_solve(&rs, ops, &bases)?.iterate)
}
