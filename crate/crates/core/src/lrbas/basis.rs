use crate::linalg::{axpy, dot, norm2};

/// Relative norm below which an orthogonalized vector counts as dependent.
pub const DEFAULT_DROP_TOL: f64 = 1e-10;

/// Euclidean-orthonormal local reduced basis of one subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBasis {
    subdomain: usize,
    local_dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl LocalBasis {
    pub fn empty(subdomain: usize, local_dim: usize) -> Self {
        Self {
            subdomain,
            local_dim,
            vectors: Vec::new(),
        }
    }

    pub fn subdomain(&self) -> usize {
        self.subdomain
    }

    /// Length of each vector (size of the subdomain index set).
    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn vector(&self, a: usize) -> &[f64] {
        &self.vectors[a]
    }

    /// Orthogonalizes `v` against the basis (classical Gram-Schmidt, applied
    /// twice) and appends the normalized remainder unless its norm is at or
    /// below `drop_tol * |v|`. Returns whether the vector was appended.
    pub fn try_append(&mut self, v: &[f64], drop_tol: f64) -> bool {
        assert_eq!(v.len(), self.local_dim, "basis vector length");
        let nv = norm2(v);
        if !(nv > 0.0) || !nv.is_finite() {
            return false;
        }
        let mut w = v.to_vec();
        for _ in 0..2 {
            let coeffs: Vec<f64> = self.vectors.iter().map(|q| dot(q, &w)).collect();
            for (q, c) in self.vectors.iter().zip(coeffs) {
                axpy(-c, q, &mut w);
            }
        }
        let nw = norm2(&w);
        if nw <= drop_tol * nv {
            return false;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        self.vectors.push(w);
        true
    }

    /// `sum_a c[a] q_a`
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.local_dim];
        for (q, &ca) in self.vectors.iter().zip(c) {
            axpy(ca, q, &mut out);
        }
        out
    }
}

/// One empty basis per subdomain.
pub fn empty_bases(dec: &crate::decomposition::Decomposition) -> Vec<LocalBasis> {
    dec.subdomains()
        .iter()
        .map(|s| LocalBasis::empty(s.id, s.dofs.len()))
        .collect()
}
