use rayon::prelude::*;

use crate::decomposition::{LocalProduct, SchwarzOperators};
use crate::error::{Error, Result};
use crate::linalg::{dot, ScaledFactorization};

use super::LocalBasis;

/// Column of the global reduced basis `Phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedColumn {
    /// `index`-th coarse vector supported on `subdomain`
    Coarse { subdomain: usize, index: usize },
    /// `index`-th local basis vector of `subdomain`
    Local { subdomain: usize, index: usize },
}

impl ReducedColumn {
    pub fn subdomain(&self) -> usize {
        match *self {
            ReducedColumn::Coarse { subdomain, .. } | ReducedColumn::Local { subdomain, .. } => {
                subdomain
            }
        }
    }
}

/// Galerkin system `Phi^T A Phi c = Phi^T f` over the coarse columns and the
/// local bases, grown column by column.
///
/// Only entries between columns of neighboring subdomains are stored; all
/// others vanish because `R_s A R_t^T = 0` there. The factorization is
/// extended as columns are appended, so previous rows are never touched.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    problem: usize,
    columns: Vec<ReducedColumn>,
    /// lower-triangular entries of each row (diagonal last), sorted by column
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    factor: ScaledFactorization,
    /// per subdomain: column indices of its coarse and local vectors
    groups: Vec<Vec<usize>>,
    local_dims: Vec<usize>,
}

/// Solution of the reduced system.
#[derive(Debug, Clone)]
pub struct ReducedSolution {
    /// `x~ = Phi c`
    pub iterate: Vec<f64>,
    /// `c`, one entry per column
    pub coefficients: Vec<f64>,
}

fn column_vector<'a>(
    col: ReducedColumn,
    ops: &'a SchwarzOperators,
    bases: &'a [LocalBasis],
) -> &'a [f64] {
    match col {
        ReducedColumn::Coarse { subdomain, index } => &ops.coarse().vectors(subdomain)[index],
        ReducedColumn::Local { subdomain, index } => bases[subdomain].vector(index),
    }
}

/// Relative first-pass pivot below which a column is eliminated a second
/// time against the explicitly formed remainder vector.
const REORTHOGONALIZE_BELOW: f64 = 0.5;

fn reduced_error(e: Error) -> Error {
    match e {
        Error::NotPositiveSemidefinite { step, pivot } => {
            Error::ReducedNotPsd(format!("pivot {pivot:e} at column {step}"))
        }
        other => other,
    }
}

/// Relative (Jacobi-scaled) pivot below which a reduced column is treated
/// as dependent on the columns before it.
pub const REDUCED_PIVOT_TOL: f64 = 1e-12;

/// Assembles the reduced system for the current bases.
pub fn reduced_assemble(ops: &SchwarzOperators, bases: &[LocalBasis]) -> Result<ReducedSystem> {
    reduced_assemble_with_tol(ops, bases, REDUCED_PIVOT_TOL)
}

/// [`reduced_assemble`] with an explicit pivot tolerance.
pub fn reduced_assemble_with_tol(
    ops: &SchwarzOperators,
    bases: &[LocalBasis],
    pivot_tol: f64,
) -> Result<ReducedSystem> {
    let n_sub = ops.num_subdomains();
    if bases.len() != n_sub {
        return Err(Error::DimensionMismatch {
            expected: n_sub,
            found: bases.len(),
        });
    }
    let mut rs = ReducedSystem {
        problem: ops.problem(),
        columns: Vec::new(),
        rows: Vec::new(),
        rhs: Vec::new(),
        factor: ScaledFactorization::new(pivot_tol),
        groups: vec![Vec::new(); n_sub],
        local_dims: vec![0; n_sub],
    };
    let coarse: Vec<ReducedColumn> = (0..n_sub)
        .flat_map(|s| {
            (0..ops.coarse().vectors(s).len()).map(move |index| ReducedColumn::Coarse {
                subdomain: s,
                index,
            })
        })
        .collect();
    rs.append_columns(&coarse, ops, bases)?;
    let all: Vec<usize> = (0..n_sub).collect();
    reduced_update(&mut rs, &all, ops, bases)?;
    Ok(rs)
}

/// Appends the basis vectors added to the `enriched` subdomains since the
/// system was last assembled or updated. Existing entries are untouched.
pub fn reduced_update(
    rs: &mut ReducedSystem,
    enriched: &[usize],
    ops: &SchwarzOperators,
    bases: &[LocalBasis],
) -> Result<()> {
    if ops.problem() != rs.problem {
        return Err(Error::StaleOperators {
            built: rs.problem,
            requested: ops.problem(),
        });
    }
    let mut new = Vec::new();
    for &i in enriched {
        let from = rs.local_dims[i];
        let to = bases[i].dim();
        if to < from {
            return Err(Error::Contract(format!(
                "basis {i} shrank from {from} to {to}"
            )));
        }
        new.extend((from..to).map(|index| ReducedColumn::Local {
            subdomain: i,
            index,
        }));
        rs.local_dims[i] = to;
    }
    rs.append_columns(&new, ops, bases)
}

impl ReducedSystem {
    fn append_columns(
        &mut self,
        new: &[ReducedColumn],
        ops: &SchwarzOperators,
        bases: &[LocalBasis],
    ) -> Result<()> {
        if new.is_empty() {
            return Ok(());
        }
        let first = self.columns.len();
        for (k, &c) in new.iter().enumerate() {
            self.columns.push(c);
            self.groups[c.subdomain()].push(first + k);
        }
        let dec = ops.decomposition();
        let a = ops.matrix();
        let f = ops.rhs();
        let columns = &self.columns;
        let groups = &self.groups;
        let computed: Vec<(Vec<(usize, f64)>, f64)> = (first..columns.len())
            .into_par_iter()
            .map_init(
                || LocalProduct::new(a.dim()),
                |prod, c| {
                    let col = columns[c];
                    let j = col.subdomain();
                    let v = column_vector(col, ops, bases);
                    prod.compute(a, dec.dofs(j), v);
                    let mut row = Vec::new();
                    for &t in dec.neighbors(j) {
                        let u = prod.gather(dec.dofs(t));
                        for &q in &groups[t] {
                            if q <= c {
                                row.push((q, dot(column_vector(columns[q], ops, bases), &u)));
                            }
                        }
                    }
                    row.sort_by_key(|e| e.0);
                    let rhs = dec.dofs(j).iter().zip(v).map(|(&g, x)| f[g] * x).sum();
                    (row, rhs)
                },
            )
            .collect();
        let mut dense = Vec::new();
        for (row, rhs) in computed {
            let c = self.rows.len();
            dense.clear();
            dense.resize(c, 0.0);
            let mut diag = 0.0;
            for &(q, v) in &row {
                if q == c {
                    diag = v;
                } else {
                    dense[q] = v;
                }
            }
            let mut pending = self.factor.begin_row(&dense, diag).map_err(reduced_error)?;
            if pending.scale() > 0.0 && pending.pivot() < REORTHOGONALIZE_BELOW {
                // nearly dependent: redo the elimination against the explicit remainder
                let g = self.factor.projection(&pending);
                let mut psi = self.expand(&g, ops, bases);
                psi.iter_mut().for_each(|v| *v = -*v);
                let col = self.columns[c];
                for (&d, &x) in dec
                    .dofs(col.subdomain())
                    .iter()
                    .zip(column_vector(col, ops, bases))
                {
                    psi[d] += pending.scale() * x;
                }
                let a_psi = a.spmv(&psi)?;
                let coupling = self.project_prefix(&a_psi, c, ops, bases);
                self.factor
                    .refine_row(&mut pending, &coupling, dot(&psi, &a_psi))
                    .map_err(reduced_error)?;
            }
            self.factor.commit_row(pending).map_err(reduced_error)?;
            self.rows.push(row);
            self.rhs.push(rhs);
        }
        Ok(())
    }

    pub fn problem(&self) -> usize {
        self.problem
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ReducedColumn] {
        &self.columns
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Columns treated as dependent by the factorization.
    pub fn dropped(&self) -> Vec<usize> {
        self.factor.dropped()
    }

    /// Stored lower-triangular row `c` as `(column, value)` pairs.
    pub fn row(&self, c: usize) -> &[(usize, f64)] {
        &self.rows[c]
    }

    /// Entry `(p, q)`; zero when not stored.
    pub fn get(&self, p: usize, q: usize) -> f64 {
        let (p, q) = if p >= q { (p, q) } else { (q, p) };
        self.rows[p]
            .binary_search_by_key(&q, |e| e.0)
            .map(|k| self.rows[p][k].1)
            .unwrap_or(0.0)
    }

    /// Column indices of subdomain `i`'s local basis vectors.
    pub fn local_columns(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.groups[i]
            .iter()
            .copied()
            .filter(|&c| matches!(self.columns[c], ReducedColumn::Local { .. }))
    }

    /// Column vectors as global vectors.
    pub fn global_column(
        &self,
        c: usize,
        ops: &SchwarzOperators,
        bases: &[LocalBasis],
    ) -> Vec<f64> {
        let col = self.columns[c];
        let mut g = vec![0.0; ops.matrix().dim()];
        let dofs = ops.decomposition().dofs(col.subdomain());
        for (&d, &x) in dofs.iter().zip(column_vector(col, ops, bases)) {
            g[d] = x;
        }
        g
    }
}

/// Solves the reduced system and forms the global iterate. One step of
/// iterative refinement against the true residual `Phi^T (f - A x~)` is
/// applied.
pub fn reduced_solve(
    rs: &ReducedSystem,
    ops: &SchwarzOperators,
    bases: &[LocalBasis],
) -> Result<ReducedSolution> {
    let mut coefficients = rs.factor.solve(&rs.rhs)?;
    let mut iterate = rs.expand(&coefficients, ops, bases);
    if rs.dim() > 0 {
        let r = ops.matrix().residual(ops.rhs(), &iterate)?;
        let rho = rs.project(&r, ops, bases);
        let delta = rs.factor.solve(&rho)?;
        coefficients
            .iter_mut()
            .zip(&delta)
            .for_each(|(c, d)| *c += d);
        iterate = rs.expand(&coefficients, ops, bases);
    }
    Ok(ReducedSolution {
        iterate,
        coefficients,
    })
}

impl ReducedSystem {
    /// `Phi c`
    pub fn expand(&self, c: &[f64], ops: &SchwarzOperators, bases: &[LocalBasis]) -> Vec<f64> {
        let mut x = vec![0.0; ops.matrix().dim()];
        let dec = ops.decomposition();
        for (&col, &cv) in self.columns.iter().zip(c) {
            if cv == 0.0 {
                continue;
            }
            let dofs = dec.dofs(col.subdomain());
            for (&d, &v) in dofs.iter().zip(column_vector(col, ops, bases)) {
                x[d] += cv * v;
            }
        }
        x
    }

    /// `Phi^T r`
    pub fn project(&self, r: &[f64], ops: &SchwarzOperators, bases: &[LocalBasis]) -> Vec<f64> {
        self.project_prefix(r, self.dim(), ops, bases)
    }

    fn project_prefix(
        &self,
        r: &[f64],
        upto: usize,
        ops: &SchwarzOperators,
        bases: &[LocalBasis],
    ) -> Vec<f64> {
        let dec = ops.decomposition();
        self.columns[..upto]
            .iter()
            .map(|&col| {
                let dofs = dec.dofs(col.subdomain());
                dofs.iter()
                    .zip(column_vector(col, ops, bases))
                    .map(|(&d, v)| r[d] * v)
                    .sum()
            })
            .collect()
    }
}

impl ReducedSolution {
    /// `R~_i^T x~_i`: the part of the iterate carried by basis `i`.
    pub fn local_solution(&self, rs: &ReducedSystem, basis: &LocalBasis) -> Vec<f64> {
        let mut out = vec![0.0; basis.local_dim()];
        for c in rs.local_columns(basis.subdomain()) {
            if let ReducedColumn::Local { index, .. } = rs.columns[c] {
                crate::linalg::axpy(self.coefficients[c], basis.vector(index), &mut out);
            }
        }
        out
    }
}
