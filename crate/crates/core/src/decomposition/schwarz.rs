use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{CoefficientField, LinearSystem};
use crate::linalg::{
    dot, factorize, Factorization, ScaledFactorization, SparseSymMatrix, DEFAULT_PIVOT_TOL,
};

use super::geneo::{geneo_subdomain, subdomain_neumann, CoarseSpace};
use super::{Decomposition, PartitionOfUnity};

/// Local factorizations, coarse space and coarse matrix of one problem.
///
/// Together they define the two-level additive Schwarz operator
/// `M^{-1} = R_0^T A_0^{-1} R_0 + sum_i R_i^T A_i^{-1} R_i`.
#[derive(Debug, Clone)]
pub struct SchwarzOperators {
    problem: usize,
    system: Arc<LinearSystem>,
    dec: Arc<Decomposition>,
    local: Vec<Arc<Factorization>>,
    coarse: CoarseSpace,
    coarse_offsets: Vec<usize>,
    coarse_factor: ScaledFactorization,
    coarse_matrix: Vec<f64>,
}

fn local_factor(
    system: &LinearSystem,
    dec: &Decomposition,
    i: usize,
) -> Result<Arc<Factorization>> {
    let a = system.matrix.extract_submatrix(dec.dofs(i))?;
    Ok(Arc::new(factorize(&a, DEFAULT_PIVOT_TOL)?))
}

/// Scatter buffer for products `A R_j^T v` with `v` local to subdomain `j`.
pub struct LocalProduct {
    values: Vec<f64>,
    touched: Vec<usize>,
    marked: Vec<bool>,
}

impl LocalProduct {
    pub fn new(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            touched: Vec::new(),
            marked: vec![false; n],
        }
    }

    /// Computes `w = A R^T v` for the index set `dofs`.
    pub fn compute(&mut self, a: &SparseSymMatrix, dofs: &[usize], v: &[f64]) {
        self.clear();
        for (&c, &vc) in dofs.iter().zip(v) {
            if vc == 0.0 {
                continue;
            }
            // A is symmetric, so column c is row c
            let (cols, vals) = a.row(c);
            for (&g, &av) in cols.iter().zip(vals) {
                if !self.marked[g] {
                    self.marked[g] = true;
                    self.touched.push(g);
                }
                self.values[g] += av * vc;
            }
        }
    }

    /// `R w` for another index set.
    pub fn gather(&self, dofs: &[usize]) -> Vec<f64> {
        dofs.iter().map(|&g| self.values[g]).collect()
    }

    fn clear(&mut self) {
        for &g in &self.touched {
            self.values[g] = 0.0;
            self.marked[g] = false;
        }
        self.touched.clear();
    }
}

impl SchwarzOperators {
    /// Builds every operator from scratch.
    pub fn build(
        problem: usize,
        system: Arc<LinearSystem>,
        sigma: &CoefficientField,
        dec: Arc<Decomposition>,
        pou: &PartitionOfUnity,
        geneo_threshold: f64,
    ) -> Result<Self> {
        let all: Vec<usize> = (0..dec.len()).collect();
        Self::assemble(
            problem,
            system,
            sigma,
            dec,
            pou,
            geneo_threshold,
            None,
            &all,
        )
    }

    /// Operators for the next problem: local factors and GenEO vectors are
    /// recomputed only for `changed` subdomains, `A_0` is always rebuilt.
    pub fn update(
        &self,
        problem: usize,
        system: Arc<LinearSystem>,
        sigma: &CoefficientField,
        pou: &PartitionOfUnity,
        changed: &[usize],
    ) -> Result<Self> {
        Self::assemble(
            problem,
            system,
            sigma,
            self.dec.clone(),
            pou,
            self.coarse.threshold(),
            Some(self),
            changed,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        problem: usize,
        system: Arc<LinearSystem>,
        sigma: &CoefficientField,
        dec: Arc<Decomposition>,
        pou: &PartitionOfUnity,
        threshold: f64,
        previous: Option<&Self>,
        changed: &[usize],
    ) -> Result<Self> {
        if system.num_free() != dec.grid().num_free() {
            return Err(Error::DimensionMismatch {
                expected: dec.grid().num_free(),
                found: system.num_free(),
            });
        }
        if !(threshold >= 0.0) {
            return Err(Error::Config(format!(
                "GenEO threshold must be >= 0, got {threshold}"
            )));
        }
        let parts: Vec<(Arc<Factorization>, Arc<super::SubdomainCoarse>)> = (0..dec.len())
            .into_par_iter()
            .map(|i| {
                if let Some(prev) = previous {
                    if changed.binary_search(&i).is_err() {
                        return Ok((prev.local[i].clone(), prev.coarse.subdomain(i).clone()));
                    }
                }
                let a = system.matrix.extract_submatrix(dec.dofs(i))?;
                let neumann = subdomain_neumann(&dec, sigma, i)?;
                let coarse = geneo_subdomain(&neumann, &a, pou.weights(i), threshold)?;
                let f = factorize(&a, DEFAULT_PIVOT_TOL)?;
                Ok((Arc::new(f), Arc::new(coarse)))
            })
            .collect::<Result<_>>()?;
        let (local, per): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
        let coarse = CoarseSpace::new(threshold, per);
        if coarse.dim() == 0 && threshold > 0.0 {
            log::warn!("GenEO selected no coarse vectors for problem {problem}");
        }
        let coarse_offsets = coarse.offsets();
        let coarse_matrix = coarse_matrix(&system.matrix, &dec, &coarse, &coarse_offsets);
        let n0 = coarse.dim();
        let mut coarse_factor = ScaledFactorization::new(DEFAULT_PIVOT_TOL);
        for c in 0..n0 {
            coarse_factor.append(
                &coarse_matrix[c * n0..c * n0 + c],
                coarse_matrix[c * n0 + c],
            )?;
        }
        if coarse_factor.rank() < n0 {
            log::warn!(
                "coarse matrix of problem {problem} is rank deficient ({} of {n0})",
                coarse_factor.rank()
            );
        }
        Ok(Self {
            problem,
            system,
            dec,
            local,
            coarse,
            coarse_offsets,
            coarse_factor,
            coarse_matrix,
        })
    }

    /// Fresh operators with explicit local factors and an explicit coarse
    /// space (test helper for hand-made configurations).
    pub fn from_parts(
        problem: usize,
        system: Arc<LinearSystem>,
        dec: Arc<Decomposition>,
        coarse: CoarseSpace,
    ) -> Result<Self> {
        let local = (0..dec.len())
            .map(|i| local_factor(&system, &dec, i))
            .collect::<Result<Vec<_>>>()?;
        let coarse_offsets = coarse.offsets();
        let coarse_matrix = coarse_matrix(&system.matrix, &dec, &coarse, &coarse_offsets);
        let n0 = coarse.dim();
        let mut coarse_factor = ScaledFactorization::new(DEFAULT_PIVOT_TOL);
        for c in 0..n0 {
            coarse_factor.append(
                &coarse_matrix[c * n0..c * n0 + c],
                coarse_matrix[c * n0 + c],
            )?;
        }
        Ok(Self {
            problem,
            system,
            dec,
            local,
            coarse,
            coarse_offsets,
            coarse_factor,
            coarse_matrix,
        })
    }

    pub fn problem(&self) -> usize {
        self.problem
    }

    pub fn system(&self) -> &Arc<LinearSystem> {
        &self.system
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.system.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.system.rhs
    }

    pub fn decomposition(&self) -> &Arc<Decomposition> {
        &self.dec
    }

    pub fn num_subdomains(&self) -> usize {
        self.dec.len()
    }

    pub fn coarse(&self) -> &CoarseSpace {
        &self.coarse
    }

    /// Offset of subdomain `s`'s coarse vectors within `R_0^T`.
    pub fn coarse_offset(&self, s: usize) -> usize {
        self.coarse_offsets[s]
    }

    /// `A_0 = R_0 A R_0^T`, row-major.
    pub fn coarse_matrix(&self) -> &[f64] {
        &self.coarse_matrix
    }

    pub fn coarse_factor(&self) -> &ScaledFactorization {
        &self.coarse_factor
    }

    pub fn local_factor(&self, i: usize) -> &Arc<Factorization> {
        &self.local[i]
    }

    /// `A_i^{-1} rhs` for a local right-hand side.
    pub fn local_solve(&self, i: usize, rhs: &[f64]) -> Result<Vec<f64>> {
        self.local[i].solve(rhs)
    }

    /// `R_0 r`.
    pub fn coarse_restrict(&self, r: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.coarse.dim());
        for s in 0..self.dec.len() {
            let dofs = self.dec.dofs(s);
            for v in self.coarse.vectors(s) {
                out.push(dofs.iter().zip(v).map(|(&g, x)| r[g] * x).sum());
            }
        }
        out
    }

    /// `out += R_0^T y`.
    pub fn coarse_prolongate_add(&self, y: &[f64], out: &mut [f64]) {
        for s in 0..self.dec.len() {
            let dofs = self.dec.dofs(s);
            for (a, v) in self.coarse.vectors(s).iter().enumerate() {
                let c = y[self.coarse_offsets[s] + a];
                for (&g, x) in dofs.iter().zip(v) {
                    out[g] += c * x;
                }
            }
        }
    }

    /// Two-level additive Schwarz operator applied to `r`. Fails when the
    /// operators were built for another problem.
    pub fn apply(&self, problem: usize, r: &[f64]) -> Result<Vec<f64>> {
        if problem != self.problem {
            return Err(Error::StaleOperators {
                built: self.problem,
                requested: problem,
            });
        }
        let n = self.system.num_free();
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.len(),
            });
        }
        let corrections: Vec<Vec<f64>> = (0..self.dec.len())
            .into_par_iter()
            .map(|i| {
                let ri: Vec<f64> = self.dec.dofs(i).iter().map(|&g| r[g]).collect();
                self.local[i].solve(&ri)
            })
            .collect::<Result<_>>()?;
        let mut z = vec![0.0; n];
        if self.coarse.dim() > 0 {
            let y = self.coarse_factor.solve(&self.coarse_restrict(r))?;
            self.coarse_prolongate_add(&y, &mut z);
        }
        for (i, c) in corrections.iter().enumerate() {
            for (&g, v) in self.dec.dofs(i).iter().zip(c) {
                z[g] += v;
            }
        }
        Ok(z)
    }
}

fn coarse_matrix(
    a: &SparseSymMatrix,
    dec: &Decomposition,
    coarse: &CoarseSpace,
    offsets: &[usize],
) -> Vec<f64> {
    let n0 = coarse.dim();
    let rows: Vec<(usize, Vec<f64>)> = (0..dec.len())
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut prod = LocalProduct::new(a.dim());
            let mut out = Vec::new();
            for (p, v) in coarse.vectors(s).iter().enumerate() {
                prod.compute(a, dec.dofs(s), v);
                let mut row = vec![0.0; n0];
                for &t in dec.neighbors(s) {
                    let u = prod.gather(dec.dofs(t));
                    for (q, w) in coarse.vectors(t).iter().enumerate() {
                        row[offsets[t] + q] = dot(w, &u);
                    }
                }
                out.push((offsets[s] + p, row));
            }
            out
        })
        .collect();
    let mut m = vec![0.0; n0 * n0];
    for (c, row) in rows {
        m[c * n0..(c + 1) * n0].copy_from_slice(&row);
    }
    // exact symmetry: keep the lower triangle
    for i in 0..n0 {
        for j in 0..i {
            m[j * n0 + i] = m[i * n0 + j];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{build_decomposition, build_partition_of_unity, SubdomainCoarse};
    use crate::fem::{assemble, Grid};
    use crate::linalg::reference_solve;

    fn ops(m: usize, layout: usize, overlap: usize, tau: f64) -> SchwarzOperators {
        let grid = Grid::new(m).unwrap();
        let dec = Arc::new(build_decomposition(&grid, layout, overlap).unwrap());
        let pou = build_partition_of_unity(&dec);
        let sigma = CoefficientField::constant(&grid, 1.0);
        let sys = Arc::new(assemble(&grid, &sigma).unwrap());
        SchwarzOperators::build(1, sys, &sigma, dec, &pou, tau).unwrap()
    }

    #[test]
    fn zero_residual_maps_to_zero() {
        let o = ops(12, 2, 1, 0.5);
        let z = o.apply(1, &vec![0.0; o.system().num_free()]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_problem_index_rejected() {
        let o = ops(8, 2, 1, 0.5);
        let r = vec![1.0; o.system().num_free()];
        assert!(matches!(
            o.apply(2, &r),
            Err(Error::StaleOperators {
                built: 1,
                requested: 2
            })
        ));
    }

    #[test]
    fn single_subdomain_is_exact_inverse() {
        let grid = Grid::new(6).unwrap();
        let dec = Arc::new(build_decomposition(&grid, 1, 1).unwrap());
        let sys = Arc::new(assemble(&grid, &CoefficientField::constant(&grid, 1.0)).unwrap());
        let o = SchwarzOperators::from_parts(1, sys.clone(), dec, CoarseSpace::empty(1)).unwrap();
        let z = o.apply(1, &sys.rhs).unwrap();
        let x = reference_solve(&sys.matrix, &sys.rhs).unwrap();
        for (a, b) in z.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn coarse_matrix_matches_dense_product() {
        let o = ops(16, 2, 2, 0.5);
        let cols = o.coarse().global_columns(o.decomposition());
        let n0 = cols.len();
        assert!(n0 > 0);
        for (i, ci) in cols.iter().enumerate() {
            let ai = o.matrix().spmv(ci).unwrap();
            for (j, cj) in cols.iter().enumerate() {
                let e = dot(cj, &ai);
                assert!((o.coarse_matrix()[i * n0 + j] - e).abs() < 1e-12 * (1.0 + e.abs()));
            }
        }
    }

    #[test]
    fn coarse_only_space_from_parts() {
        let grid = Grid::new(8).unwrap();
        let dec = Arc::new(build_decomposition(&grid, 2, 1).unwrap());
        let sys = Arc::new(assemble(&grid, &CoefficientField::constant(&grid, 1.0)).unwrap());
        let per = (0..4)
            .map(|i| {
                let n = dec.dofs(i).len();
                Arc::new(SubdomainCoarse {
                    eigenvalues: vec![0.0],
                    vectors: vec![vec![1.0 / (n as f64).sqrt(); n]],
                })
            })
            .collect();
        let o = SchwarzOperators::from_parts(1, sys, dec, CoarseSpace::new(0.5, per)).unwrap();
        assert_eq!(o.coarse_factor().rank(), 4);
    }
}
