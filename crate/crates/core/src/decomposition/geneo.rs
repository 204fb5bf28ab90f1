use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{assemble_local_neumann, CoefficientField, LinearSystem};
use crate::linalg::{norm2, sym_gen_eig_below, DenseSymMatrix};

use super::{Decomposition, PartitionOfUnity};

/// Relative diagonal shift applied to `D_i A_i D_i` before the eigensolve.
pub const GENEO_REGULARIZATION: f64 = 1e-12;

/// Coarse vectors contributed by one subdomain, as local vectors on its
/// index set.
#[derive(Debug, Clone, Default)]
pub struct SubdomainCoarse {
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Columns of `R_0^T`, grouped by the subdomain that supports them.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    threshold: f64,
    per_subdomain: Vec<Arc<SubdomainCoarse>>,
}

impl CoarseSpace {
    pub fn new(threshold: f64, per_subdomain: Vec<Arc<SubdomainCoarse>>) -> Self {
        Self {
            threshold,
            per_subdomain,
        }
    }

    /// Coarse space with no columns.
    pub fn empty(subdomains: usize) -> Self {
        Self {
            threshold: 0.0,
            per_subdomain: (0..subdomains)
                .map(|_| Arc::new(SubdomainCoarse::default()))
                .collect(),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn dim(&self) -> usize {
        self.per_subdomain.iter().map(|c| c.vectors.len()).sum()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.per_subdomain.iter().map(|c| c.vectors.len()).collect()
    }

    pub fn subdomain(&self, i: usize) -> &Arc<SubdomainCoarse> {
        &self.per_subdomain[i]
    }

    pub fn vectors(&self, i: usize) -> &[Vec<f64>] {
        &self.per_subdomain[i].vectors
    }

    pub fn num_subdomains(&self) -> usize {
        self.per_subdomain.len()
    }

    /// Column offsets of each subdomain's group within `R_0^T`.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.per_subdomain.len() + 1);
        off.push(0);
        for c in &self.per_subdomain {
            off.push(off.last().unwrap() + c.vectors.len());
        }
        off
    }

    /// Columns of `R_0^T` as global vectors (test and export helper).
    pub fn global_columns(&self, dec: &Decomposition) -> Vec<Vec<f64>> {
        let n = dec.grid().num_free();
        let mut cols = Vec::with_capacity(self.dim());
        for (i, c) in self.per_subdomain.iter().enumerate() {
            for v in &c.vectors {
                let mut g = vec![0.0; n];
                for (&d, &x) in dec.dofs(i).iter().zip(v) {
                    g[d] = x;
                }
                cols.push(g);
            }
        }
        cols
    }
}

/// GenEO vectors of one subdomain: solves `A_i^Neu p = lambda D_i A_i D_i p`
/// and keeps `D_i p` (normalized) for every `lambda < threshold`.
pub fn geneo_subdomain(
    neumann: &DenseSymMatrix,
    local: &DenseSymMatrix,
    weights: &[f64],
    threshold: f64,
) -> Result<SubdomainCoarse> {
    if threshold <= 0.0 {
        return Ok(SubdomainCoarse::default());
    }
    let mut rhs = local.scaled(weights);
    let delta = GENEO_REGULARIZATION * rhs.diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
    rhs.shift_diagonal(delta);
    let eig = sym_gen_eig_below(neumann, &rhs, threshold)?;
    let vectors = (0..eig.len())
        .map(|k| {
            let mut v: Vec<f64> = eig
                .vector(k)
                .iter()
                .zip(weights)
                .map(|(p, d)| p * d)
                .collect();
            let nrm = norm2(&v);
            v.iter_mut().for_each(|x| *x /= nrm);
            v
        })
        .collect();
    Ok(SubdomainCoarse {
        eigenvalues: eig.values,
        vectors,
    })
}

/// Neumann matrix of subdomain `i` over its extended element block.
pub fn subdomain_neumann(
    dec: &Decomposition,
    sigma: &CoefficientField,
    i: usize,
) -> Result<DenseSymMatrix> {
    let s = dec.subdomain(i);
    let (m, dofs) = assemble_local_neumann(dec.grid(), sigma, &s.extended.elements(dec.grid()))?;
    if dofs != s.dofs {
        return Err(Error::Contract(format!(
            "Neumann node set of subdomain {i} differs from its index set"
        )));
    }
    Ok(m)
}

/// Builds the GenEO coarse space for every subdomain.
pub fn build_geneo_coarse(
    dec: &Decomposition,
    pou: &PartitionOfUnity,
    system: &LinearSystem,
    sigma: &CoefficientField,
    threshold: f64,
) -> Result<CoarseSpace> {
    if !(threshold >= 0.0) {
        return Err(Error::Config(format!(
            "GenEO threshold must be >= 0, got {threshold}"
        )));
    }
    let per: Vec<Arc<SubdomainCoarse>> = (0..dec.len())
        .into_par_iter()
        .map(|i| {
            let neumann = subdomain_neumann(dec, sigma, i)?;
            let local = system.matrix.extract_submatrix(dec.dofs(i))?;
            geneo_subdomain(&neumann, &local, pou.weights(i), threshold).map(Arc::new)
        })
        .collect::<Result<_>>()?;
    let coarse = CoarseSpace::new(threshold, per);
    if coarse.dim() == 0 && threshold > 0.0 {
        log::warn!("GenEO selected no coarse vectors at threshold {threshold}");
    }
    Ok(coarse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{build_decomposition, build_partition_of_unity};
    use crate::fem::{assemble, Grid};

    fn setup(
        m: usize,
        layout: usize,
        overlap: usize,
    ) -> (
        Decomposition,
        PartitionOfUnity,
        LinearSystem,
        CoefficientField,
    ) {
        let grid = Grid::new(m).unwrap();
        let dec = build_decomposition(&grid, layout, overlap).unwrap();
        let pou = build_partition_of_unity(&dec);
        let sigma = CoefficientField::constant(&grid, 1.0);
        let sys = assemble(&grid, &sigma).unwrap();
        (dec, pou, sys, sigma)
    }

    #[test]
    fn floating_subdomain_selects_constant() {
        let (dec, pou, sys, sigma) = setup(24, 3, 2);
        // centre subdomain touches no Dirichlet boundary
        let i = 4;
        let neumann = subdomain_neumann(&dec, &sigma, i).unwrap();
        let local = sys.matrix.extract_submatrix(dec.dofs(i)).unwrap();
        let c = geneo_subdomain(&neumann, &local, pou.weights(i), 0.5).unwrap();
        assert!(!c.vectors.is_empty());
        assert!(c.eigenvalues[0].abs() < 1e-8);
        // first vector is proportional to D_i * 1
        let w = pou.weights(i);
        let v = &c.vectors[0];
        let ratio = v[0] / w[0];
        for (a, b) in v.iter().zip(w) {
            assert!((a - ratio * b).abs() < 1e-6 * ratio.abs());
        }
    }

    #[test]
    fn zero_threshold_gives_empty_space() {
        let (dec, pou, sys, sigma) = setup(12, 2, 1);
        let coarse = build_geneo_coarse(&dec, &pou, &sys, &sigma, 0.0).unwrap();
        assert_eq!(coarse.dim(), 0);
    }

    #[test]
    fn columns_supported_in_one_subdomain() {
        let (dec, pou, sys, sigma) = setup(16, 2, 2);
        let coarse = build_geneo_coarse(&dec, &pou, &sys, &sigma, 0.5).unwrap();
        assert!(coarse.dim() > 0);
        let off = coarse.offsets();
        for (c, col) in coarse.global_columns(&dec).iter().enumerate() {
            let owner = (0..dec.len())
                .find(|&i| off[i] <= c && c < off[i + 1])
                .unwrap();
            for (d, v) in col.iter().enumerate() {
                if *v != 0.0 {
                    assert!(dec.dofs(owner).binary_search(&d).is_ok());
                }
            }
        }
    }
}
