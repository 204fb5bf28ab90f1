use rayon::prelude::*;

use crate::decomposition::{Decomposition, SchwarzOperators};
use crate::error::{Error, Result};
use crate::linalg::{norm2, restrict};

use super::{
    reduced_assemble_with_tol, reduced_solve, reduced_update, LocalBasis, ProblemReport,
    DEFAULT_DROP_TOL, REDUCED_PIVOT_TOL,
};

/// Parameters of one LRBAS solve.
#[derive(Debug, Clone, Copy)]
pub struct LrbasParams {
    /// relative residual tolerance
    pub eps: f64,
    /// local enrichment threshold; 0 enriches every subdomain
    pub eps_loc: f64,
    pub max_iter: usize,
    pub drop_tol: f64,
    /// pivot tolerance of the reduced factorization
    pub pivot_tol: f64,
}

impl Default for LrbasParams {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            eps_loc: 0.25,
            max_iter: 200,
            drop_tol: DEFAULT_DROP_TOL,
            pivot_tol: REDUCED_PIVOT_TOL,
        }
    }
}

/// `|R_i r|^2` for every subdomain.
pub fn local_residual_norms(r: &[f64], dec: &Decomposition) -> Vec<f64> {
    dec.subdomains()
        .iter()
        .map(|s| s.dofs.iter().map(|&g| r[g] * r[g]).sum())
        .collect()
}

/// Subdomains with `|R_i r|^2 > eps_loc / I * |r|^2`, given the local
/// squared norms and `|r|^2`.
pub fn select_enrichment(local_norms: &[f64], residual_sq: f64, eps_loc: f64) -> Vec<usize> {
    let threshold = eps_loc / local_norms.len() as f64 * residual_sq;
    (0..local_norms.len())
        .filter(|&i| local_norms[i] > threshold)
        .collect()
}

/// Result of one enrichment sweep.
#[derive(Debug, Clone, Default)]
pub struct Enrichment {
    /// subdomains whose correction was computed
    pub selected: Vec<usize>,
    /// subdomains whose basis grew
    pub grown: Vec<usize>,
    /// `A_i^{-1} R_i r` for every selected subdomain, before orthogonalization
    pub corrections: Vec<(usize, Vec<f64>)>,
}

/// Computes the local Schwarz corrections of the selected subdomains and
/// appends them to the bases.
pub fn enrich(
    r: &[f64],
    eps_loc: f64,
    ops: &SchwarzOperators,
    bases: &mut [LocalBasis],
    drop_tol: f64,
) -> Result<Enrichment> {
    let dec = ops.decomposition();
    let norms = local_residual_norms(r, dec);
    let rr: f64 = r.iter().map(|v| v * v).sum();
    let selected = select_enrichment(&norms, rr, eps_loc);
    let corrections: Vec<(usize, Vec<f64>)> = selected
        .par_iter()
        .map(|&i| Ok((i, ops.local_solve(i, &restrict(r, dec.dofs(i)))?)))
        .collect::<Result<_>>()?;
    let mut grown = Vec::new();
    for (i, y) in &corrections {
        if bases[*i].try_append(y, drop_tol) {
            grown.push(*i);
        }
    }
    Ok(Enrichment {
        selected,
        grown,
        corrections,
    })
}

/// State recorded after each reduced solve (invariant checks).
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub iterate: Vec<f64>,
    pub residual: Vec<f64>,
    /// enrichment performed from this residual, if any
    pub enrichment: Option<Enrichment>,
    /// reduced basis columns as global vectors
    pub space: Vec<Vec<f64>>,
}

/// Outcome of [`lrbas_solve_one`].
#[derive(Debug, Clone)]
pub struct LrbasOutcome {
    pub report: ProblemReport,
    /// bases at convergence
    pub bases: Vec<LocalBasis>,
    /// `R~_i^T x~_i` per subdomain
    pub local_solutions: Vec<Vec<f64>>,
    /// whether each basis grew during this problem
    pub grown: Vec<bool>,
    pub trace: Option<Vec<TraceStep>>,
}

/// LRBAS for one problem of the sequence, starting from `bases`.
pub fn lrbas_solve_one(
    ops: &SchwarzOperators,
    mut bases: Vec<LocalBasis>,
    params: &LrbasParams,
    record_trace: bool,
) -> Result<LrbasOutcome> {
    let dec = ops.decomposition().clone();
    let a = ops.matrix();
    let f = ops.rhs();
    let nf = norm2(f);
    let rel = |r: &[f64]| if nf > 0.0 { norm2(r) / nf } else { norm2(r) };
    let mut grown = vec![false; dec.len()];
    let mut corrections = vec![0usize; dec.len()];
    let mut trace = record_trace.then(Vec::new);

    let mut rs = reduced_assemble_with_tol(ops, &bases, params.pivot_tol)?;
    let mut sol = reduced_solve(&rs, ops, &bases)?;
    let mut r = a.residual(f, &sol.iterate)?;
    let mut history = vec![rel(&r)];
    let mut iterations = 0;
    while rel(&r) > params.eps {
        if iterations >= params.max_iter {
            return Err(Error::NotConverged {
                solver: "LRBAS",
                problem: ops.problem(),
                iterations,
                relative_residual: rel(&r),
            });
        }
        let e = enrich(&r, params.eps_loc, ops, &mut bases, params.drop_tol)?;
        for &(i, _) in &e.corrections {
            corrections[i] += 1;
        }
        for &i in &e.grown {
            grown[i] = true;
        }
        if let Some(t) = trace.as_mut() {
            t.push(TraceStep {
                iterate: sol.iterate.clone(),
                residual: r.clone(),
                enrichment: Some(e.clone()),
                space: (0..rs.dim())
                    .map(|c| rs.global_column(c, ops, &bases))
                    .collect(),
            });
        }
        if e.grown.is_empty() {
            // every correction was already in the space: no progress possible
            return Err(Error::NotConverged {
                solver: "LRBAS",
                problem: ops.problem(),
                iterations,
                relative_residual: rel(&r),
            });
        }
        reduced_update(&mut rs, &e.grown, ops, &bases)?;
        sol = reduced_solve(&rs, ops, &bases)?;
        r = a.residual(f, &sol.iterate)?;
        iterations += 1;
        history.push(rel(&r));
    }
    if let Some(t) = trace.as_mut() {
        t.push(TraceStep {
            iterate: sol.iterate.clone(),
            residual: r.clone(),
            enrichment: None,
            space: (0..rs.dim())
                .map(|c| rs.global_column(c, ops, &bases))
                .collect(),
        });
    }
    let local_solutions = bases.iter().map(|b| sol.local_solution(&rs, b)).collect();
    let report = ProblemReport {
        k: ops.problem(),
        iterations,
        local_corrections: corrections.iter().sum(),
        corrections,
        coarse_solves: 0,
        final_relative_residual: *history.last().unwrap(),
        residual_history: history,
        solution: sol.iterate,
    };
    Ok(LrbasOutcome {
        report,
        bases,
        local_solutions,
        grown,
        trace,
    })
}

/// Bases carried into the next problem: with `keep_full` the final bases,
/// otherwise the initial basis of every grown subdomain plus its local
/// solution vector.
pub fn transition_bases(
    initial: Vec<LocalBasis>,
    outcome: LrbasOutcome,
    keep_full: bool,
    drop_tol: f64,
) -> Vec<LocalBasis> {
    if keep_full {
        return outcome.bases;
    }
    initial
        .into_iter()
        .zip(outcome.bases)
        .enumerate()
        .map(|(i, (mut init, fin))| {
            if outcome.grown[i] {
                init.try_append(&outcome.local_solutions[i], drop_tol);
                init
            } else {
                fin
            }
        })
        .collect()
}
