use crate::error::{Error, Result};

use super::DenseSymMatrix;

/// Symmetric matrix in compressed sparse row form with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds the matrix from `(row, col, value)` triplets. Duplicates are
    /// summed in input order; both triangles must be supplied by the caller.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; dim + 1];
        for &(r, c, _) in triplets {
            if r >= dim {
                return Err(Error::IndexOutOfRange { index: r, dim });
            }
            if c >= dim {
                return Err(Error::IndexOutOfRange { index: c, dim });
            }
            counts[r + 1] += 1;
        }
        for i in 0..dim {
            counts[i + 1] += counts[i];
        }
        // stable bucket sort by row, then sort each row by column
        let mut slots = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            entries[slots[r]] = (c, v);
            slots[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..dim {
            let row = &mut entries[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in row.iter() {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let m = Self {
            dim,
            row_ptr,
            col_idx,
            values,
        };
        m.check_structure()?;
        Ok(m)
    }

    /// Builds from raw CSR arrays, validating the invariants.
    pub fn from_csr(
        dim: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: dim + 1,
                found: row_ptr.len(),
            });
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::Contract("inconsistent CSR array lengths".into()));
        }
        let m = Self {
            dim,
            row_ptr,
            col_idx,
            values,
        };
        m.check_structure()?;
        Ok(m)
    }

    fn check_structure(&self) -> Result<()> {
        for r in 0..self.dim {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            if e < s {
                return Err(Error::Contract(format!("row offsets decrease at row {r}")));
            }
            for k in s..e {
                let c = self.col_idx[k];
                if c >= self.dim {
                    return Err(Error::IndexOutOfRange {
                        index: c,
                        dim: self.dim,
                    });
                }
                if k > s && self.col_idx[k - 1] >= c {
                    return Err(Error::Contract(format!(
                        "column indices not strictly increasing in row {r}"
                    )));
                }
                match self.get(c, r) {
                    Some(v) if v == self.values[k] => {}
                    _ => {
                        return Err(Error::Contract(format!(
                            "matrix not symmetric at ({r}, {c})"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks the additional invariant for system operators: every diagonal
    /// entry present and positive.
    pub fn check_positive_diagonal(&self) -> Result<()> {
        for i in 0..self.dim {
            match self.get(i, i) {
                Some(d) if d > 0.0 => {}
                other => {
                    return Err(Error::Contract(format!(
                        "diagonal entry {i} is {other:?}, expected positive"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.get(i, i).unwrap_or(0.0))
            .collect()
    }

    /// `A x`, accumulating each row left to right.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.dim];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked variant of [`spmv`](Self::spmv) writing into `y`.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    /// `f - A x`
    pub fn residual(&self, f: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: f.len(),
            });
        }
        let mut r = self.spmv(x)?;
        for (ri, fi) in r.iter_mut().zip(f) {
            *ri = fi - *ri;
        }
        Ok(r)
    }

    /// `x^T A x`
    pub fn energy(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.dim];
        self.spmv_into(x, &mut y);
        super::dot(x, &y)
    }

    /// Dense `A[rows, rows]` for strictly increasing `rows`.
    pub fn extract_submatrix(&self, rows: &[usize]) -> Result<DenseSymMatrix> {
        let local = self.local_map(rows)?;
        let m = rows.len();
        let mut data = vec![0.0; m * m];
        for (p, &g) in rows.iter().enumerate() {
            let (cols, vals) = self.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                if let Some(q) = local(c) {
                    data[p * m + q] = v;
                }
            }
        }
        Ok(DenseSymMatrix::from_row_major_unchecked(m, data))
    }

    /// Sparse `A[rows, cols]` in local numbering. Both index lists must be
    /// strictly increasing.
    pub fn extract_block(&self, rows: &[usize], cols: &[usize]) -> Result<CsrMatrix> {
        let _validated = self.local_map(rows)?;
        let col_local = self.local_map(cols)?;
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &g in rows {
            let (rc, rv) = self.row(g);
            for (&c, &v) in rc.iter().zip(rv) {
                if let Some(q) = col_local(c) {
                    col_idx.push(q);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            nrows: rows.len(),
            ncols: cols.len(),
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Returns a lookup closure global -> local for a strictly increasing
    /// index list, after validating it.
    fn local_map<'a>(&self, idx: &'a [usize]) -> Result<impl Fn(usize) -> Option<usize> + 'a> {
        for (k, &i) in idx.iter().enumerate() {
            if i >= self.dim {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    dim: self.dim,
                });
            }
            if k > 0 && idx[k - 1] >= i {
                return Err(Error::Contract(
                    "index set must be strictly increasing".into(),
                ));
            }
        }
        Ok(move |g: usize| idx.binary_search(&g).ok())
    }
}

/// General (rectangular) CSR matrix, used for the couplings `R_i A R_j^T`
/// between overlapping subdomains.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y = M x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * x[self.col_idx[k]];
                }
                acc
            })
            .collect()
    }

    /// `y = M^T x`
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * xr;
            }
        }
        y
    }

    /// `u^T M v`
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        super::dot(u, &self.mul_vec(v))
    }
}
