use crate::error::{Error, Result};

use super::{DenseMatrix, DenseSymMatrix};

/// Relative pivot threshold used throughout the crate.
pub const DEFAULT_PIVOT_TOL: f64 = 1e-12;

/// Semidefinite Cholesky factor `M = L L^T` computed row by row in natural
/// order.
///
/// A row whose pivot falls to `pivot_tol * scale` or below is treated as a
/// rank deficiency: its index is recorded as dropped and excluded from the
/// factor, and [`solve`](Self::solve) sets that component of the solution to
/// zero. `scale` is the largest initial diagonal entry.
///
/// `L` is kept in skyline form: row `t` stores the entries from its first
/// structural nonzero up to the diagonal, in the coordinates of the retained
/// rows. Banded inputs therefore factor and solve in banded time.
#[derive(Debug, Clone)]
pub struct Factorization {
    dim: usize,
    pivot_tol: f64,
    scale: f64,
    /// original index of each retained row
    kept: Vec<usize>,
    /// retained position of each original index
    position: Vec<Option<usize>>,
    /// first stored column (retained coordinates) of each retained row
    start: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

/// Factorizes `m`, dropping rows whose pivot is `<= pivot_tol * max(diag)`.
pub fn factorize(m: &DenseSymMatrix, pivot_tol: f64) -> Result<Factorization> {
    if !(pivot_tol >= 0.0) {
        return Err(Error::Contract(format!(
            "pivot_tol must be >= 0, got {pivot_tol}"
        )));
    }
    let n = m.dim();
    let scale = (0..n).fold(0.0f64, |s, i| s.max(m.get(i, i)));
    let mut f = Factorization::empty(pivot_tol, scale);
    for i in 0..n {
        let row = m.row(i);
        f.append(&row[..i], row[i])?;
    }
    Ok(f)
}

impl Factorization {
    /// An empty factor to be grown with [`append`](Self::append).
    pub fn empty(pivot_tol: f64, scale: f64) -> Self {
        Self {
            dim: 0,
            pivot_tol,
            scale,
            kept: Vec::new(),
            position: Vec::new(),
            start: Vec::new(),
            offsets: vec![0],
            values: Vec::new(),
        }
    }

    /// Appends one row/column to the factored matrix. `coupling` holds the
    /// entries against every previously appended index (dropped ones
    /// included, they are ignored) and `diag` the new diagonal entry.
    /// Returns whether the row was retained.
    pub fn append(&mut self, coupling: &[f64], diag: f64) -> Result<bool> {
        let (first, row) = self.forward_row(coupling)?;
        let pivot = diag - super::dot(&row, &row);
        self.push_row(first, row, pivot)
    }

    /// `l = L^{-1} b` for the coupling `b` of a prospective row, in retained
    /// coordinates starting at the returned index (earlier entries vanish).
    pub fn forward_row(&self, coupling: &[f64]) -> Result<(usize, Vec<f64>)> {
        if coupling.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: coupling.len(),
            });
        }
        let r = self.kept.len();
        let first = self
            .kept
            .iter()
            .position(|&j| coupling[j] != 0.0)
            .unwrap_or(r);
        let mut row = vec![0.0; r - first];
        for t in first..r {
            let lt = self.row(t);
            let st = self.start[t];
            let lo = st.max(first);
            let mut acc = coupling[self.kept[t]];
            if lo < t {
                acc -= super::dot(&row[lo - first..t - first], &lt[lo - st..t - st]);
            }
            row[t - first] = acc / lt[t - st];
        }
        Ok((first, row))
    }

    /// `L^{-T} l` for a row from [`forward_row`](Self::forward_row), in
    /// original coordinates (dropped indices zero).
    pub fn backward_row(&self, first: usize, row: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.kept.len()];
        y[first..].copy_from_slice(row);
        self.backward_in_place(&mut y);
        let mut x = vec![0.0; self.dim];
        for (t, &i) in self.kept.iter().enumerate() {
            x[i] = y[t];
        }
        x
    }

    /// Appends the row `[l, sqrt(pivot)]`, or records the index as dropped
    /// when the pivot is at or below the threshold.
    pub fn push_row(&mut self, first: usize, mut row: Vec<f64>, pivot: f64) -> Result<bool> {
        let r = self.kept.len();
        if first + row.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r - first,
                found: row.len(),
            });
        }
        let threshold = self.pivot_tol * self.scale;
        let index = self.dim;
        if pivot <= threshold {
            if pivot < -threshold {
                return Err(Error::NotPositiveSemidefinite { step: index, pivot });
            }
            self.dim += 1;
            self.position.push(None);
            return Ok(false);
        }
        self.dim += 1;
        row.push(pivot.sqrt());
        self.position.push(Some(r));
        self.kept.push(index);
        self.start.push(first);
        self.values.extend_from_slice(&row);
        self.offsets.push(self.values.len());
        Ok(true)
    }

    fn row(&self, t: usize) -> &[f64] {
        &self.values[self.offsets[t]..self.offsets[t + 1]]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn pivot_tol(&self) -> f64 {
        self.pivot_tol
    }

    /// Original indices treated as rank deficient.
    pub fn dropped(&self) -> Vec<usize> {
        (0..self.dim)
            .filter(|&i| self.position[i].is_none())
            .collect()
    }

    pub fn is_dropped(&self, i: usize) -> bool {
        self.position[i].is_none()
    }

    /// Solves `M x = b` on the retained subspace; dropped components are zero.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: b.len(),
            });
        }
        let mut y: Vec<f64> = self.kept.iter().map(|&i| b[i]).collect();
        self.solve_retained_in_place(&mut y);
        let mut x = vec![0.0; self.dim];
        for (t, &i) in self.kept.iter().enumerate() {
            x[i] = y[t];
        }
        Ok(x)
    }

    /// Solves `L L^T y = y` in retained coordinates.
    pub(crate) fn solve_retained_in_place(&self, y: &mut [f64]) {
        let r = self.kept.len();
        debug_assert_eq!(y.len(), r);
        for t in 0..r {
            let lt = self.row(t);
            let st = self.start[t];
            let acc = y[t] - super::dot(&lt[..t - st], &y[st..t]);
            y[t] = acc / lt[t - st];
        }
        for t in (0..r).rev() {
            let lt = self.row(t);
            let st = self.start[t];
            y[t] /= lt[t - st];
            let xt = y[t];
            super::axpy(-xt, &lt[..t - st], &mut y[st..t]);
        }
    }

    /// Applies `L^{-1}` to each row of the row-major `rows x dim` block `x`
    /// restricted to retained coordinates, i.e. solves `L Y = X` where `X`
    /// has one row per retained index. Used to form `L^{-1} A L^{-T}`.
    pub(crate) fn forward_rows_in_place(&self, x: &mut [f64], width: usize) {
        let r = self.kept.len();
        debug_assert_eq!(x.len(), r * width);
        for t in 0..r {
            let lt = self.row(t);
            let st = self.start[t];
            let (done, rest) = x.split_at_mut(t * width);
            let xt = &mut rest[..width];
            for (k, &l) in lt[..t - st].iter().enumerate() {
                if l != 0.0 {
                    let src = &done[(st + k) * width..(st + k + 1) * width];
                    super::axpy(-l, src, xt);
                }
            }
            let d = 1.0 / lt[t - st];
            xt.iter_mut().for_each(|v| *v *= d);
        }
    }

    /// Solves `L^T y = z` (retained coordinates) in place.
    pub(crate) fn backward_in_place(&self, y: &mut [f64]) {
        let r = self.kept.len();
        debug_assert_eq!(y.len(), r);
        for t in (0..r).rev() {
            let lt = self.row(t);
            let st = self.start[t];
            y[t] /= lt[t - st];
            let xt = y[t];
            super::axpy(-xt, &lt[..t - st], &mut y[st..t]);
        }
    }

    /// Original indices of the retained rows.
    pub fn retained(&self) -> &[usize] {
        &self.kept
    }

    /// `L` as a dense `dim x rank` matrix (rows of dropped indices are zero).
    pub fn lower_dense(&self) -> DenseMatrix {
        let r = self.kept.len();
        let mut l = DenseMatrix::zeros(self.dim, r);
        for t in 0..r {
            let st = self.start[t];
            for (k, v) in self.row(t).iter().enumerate() {
                l.set(self.kept[t], st + k, *v);
            }
        }
        l
    }
}

/// Row of a [`ScaledFactorization`] under elimination.
#[derive(Debug, Clone)]
pub struct PendingRow {
    first: usize,
    row: Vec<f64>,
    pivot: f64,
    scale: f64,
}

impl PendingRow {
    /// Pivot relative to the row's own diagonal entry.
    pub fn pivot(&self) -> f64 {
        self.pivot
    }

    /// `diag^{-1/2}`, zero for a vanishing diagonal.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// [`Factorization`] of `S M S` with `S = diag(M)^{-1/2}`, so every pivot
/// is judged relative to its own diagonal entry. Rows with a non-positive
/// diagonal are dropped.
#[derive(Debug, Clone)]
pub struct ScaledFactorization {
    factor: Factorization,
    scaling: Vec<f64>,
}

impl ScaledFactorization {
    pub fn new(pivot_tol: f64) -> Self {
        Self {
            factor: Factorization::empty(pivot_tol, 1.0),
            scaling: Vec::new(),
        }
    }

    pub fn factorize(m: &DenseSymMatrix, pivot_tol: f64) -> Result<Self> {
        let mut f = Self::new(pivot_tol);
        for i in 0..m.dim() {
            let row = m.row(i);
            f.append(&row[..i], row[i])?;
        }
        Ok(f)
    }

    /// Appends a row of the unscaled matrix; see [`Factorization::append`].
    pub fn append(&mut self, coupling: &[f64], diag: f64) -> Result<bool> {
        let row = self.begin_row(coupling, diag)?;
        self.commit_row(row)
    }

    /// First elimination pass for a prospective row; the row is only added
    /// by [`commit_row`](Self::commit_row).
    pub fn begin_row(&self, coupling: &[f64], diag: f64) -> Result<PendingRow> {
        if coupling.len() != self.scaling.len() {
            return Err(Error::DimensionMismatch {
                expected: self.scaling.len(),
                found: coupling.len(),
            });
        }
        if !(diag > 0.0) {
            if diag < 0.0 {
                return Err(Error::NotPositiveSemidefinite {
                    step: self.scaling.len(),
                    pivot: diag,
                });
            }
            return Ok(PendingRow {
                first: self.factor.rank(),
                row: Vec::new(),
                pivot: 0.0,
                scale: 0.0,
            });
        }
        let s = 1.0 / diag.sqrt();
        let scaled: Vec<f64> = coupling
            .iter()
            .zip(&self.scaling)
            .map(|(c, t)| c * t * s)
            .collect();
        let (first, row) = self.factor.forward_row(&scaled)?;
        let pivot = 1.0 - super::dot(&row, &row);
        Ok(PendingRow {
            first,
            row,
            pivot,
            scale: s,
        })
    }

    /// Coefficients `g` of the projection of the scaled new column onto the
    /// retained columns, in the `M`-inner product: the remainder is
    /// `s v - sum_j g_j v_j` with `s` from [`PendingRow::scale`].
    pub fn projection(&self, row: &PendingRow) -> Vec<f64> {
        let mut g = self.factor.backward_row(row.first, &row.row);
        g.iter_mut().zip(&self.scaling).for_each(|(v, t)| *v *= t);
        g
    }

    /// Second elimination pass from the remainder of
    /// [`projection`](Self::projection): `coupling` are its unscaled
    /// products with every previous column and `energy` its `M`-norm
    /// squared, both computed from the vectors themselves.
    pub fn refine_row(&self, row: &mut PendingRow, coupling: &[f64], energy: f64) -> Result<()> {
        if row.scale == 0.0 {
            return Ok(());
        }
        let scaled: Vec<f64> = coupling
            .iter()
            .zip(&self.scaling)
            .map(|(c, t)| c * t)
            .collect();
        let (first, extra) = self.factor.forward_row(&scaled)?;
        let start = first.min(row.first);
        let mut merged = vec![0.0; self.factor.rank() - start];
        merged[row.first - start..].copy_from_slice(&row.row);
        for (m, e) in merged[first - start..].iter_mut().zip(&extra) {
            *m += e;
        }
        row.first = start;
        row.row = merged;
        row.pivot = energy - super::dot(&extra, &extra);
        Ok(())
    }

    /// Adds a row from [`begin_row`](Self::begin_row); returns whether it
    /// was retained.
    pub fn commit_row(&mut self, row: PendingRow) -> Result<bool> {
        if row.scale == 0.0 {
            let step = self.scaling.len();
            self.scaling.push(0.0);
            self.factor.append(&vec![0.0; step], 0.0)?;
            return Ok(false);
        }
        let kept = self.factor.push_row(row.first, row.row, row.pivot)?;
        self.scaling.push(row.scale);
        Ok(kept)
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn rank(&self) -> usize {
        self.factor.rank()
    }

    pub fn dropped(&self) -> Vec<usize> {
        self.factor.dropped()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: b.len(),
            });
        }
        let sb: Vec<f64> = b.iter().zip(&self.scaling).map(|(v, s)| v * s).collect();
        let mut x = self.factor.solve(&sb)?;
        x.iter_mut().zip(&self.scaling).for_each(|(v, s)| *v *= s);
        Ok(x)
    }
}
