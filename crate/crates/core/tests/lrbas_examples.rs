mod common;

use std::sync::Arc;

use lrbas::decomposition::build_decomposition;
use lrbas::fem::{CoefficientField, ElementSet, Grid};
use lrbas::linalg::{reference_solve_with_tol, SparseSymMatrix};
use lrbas::lrbas::{
    empty_bases, enrich, lrbas_solve_one, pou_snapshot_guess, reduced_assemble, reduced_solve,
    reduced_update, run_sequence, select_enrichment, transition_bases, LrbasParams,
    ProblemSequence, SolverParams, Strategy, DEFAULT_DROP_TOL,
};
use proptest::prelude::*;

fn energy_error(a: &SparseSymMatrix, x: &[f64], reference: &[f64]) -> f64 {
    let e: Vec<f64> = x.iter().zip(reference).map(|(u, v)| u - v).collect();
    a.energy(&e).sqrt()
}

fn lrbas(eps_loc: f64, keep_full: bool) -> SolverParams {
    SolverParams {
        strategy: Strategy::Lrbas,
        eps_loc,
        keep_full,
        ..SolverParams::default()
    }
}

/// Two copies of the unit-coefficient problem on a 20 x 20 grid.
fn repeated_sequence(layout: usize, copies: usize) -> ProblemSequence {
    let grid = Grid::new(20).unwrap();
    let dec = Arc::new(build_decomposition(&grid, layout, 1).unwrap());
    let field = CoefficientField::constant(&grid, 1.0);
    let fields = (0..copies)
        .map(|_| (field.clone(), ElementSet::empty()))
        .collect();
    ProblemSequence::from_fields(dec, fields, 0.5).unwrap()
}

#[test]
fn enrichment_threshold_arithmetic() {
    let mut norms = vec![0.0; 100];
    norms[0] = 0.003;
    norms[1] = 0.002;
    assert_eq!(select_enrichment(&norms, 1.0, 0.25), vec![0]);
    assert_eq!(select_enrichment(&norms, 1.0, 0.0), vec![0, 1]);
    assert!(select_enrichment(&[0.0; 100], 0.0, 0.0).is_empty());
}

proptest! {
    #[test]
    fn adaptive_selection_is_subset_of_full(
        norms in proptest::collection::vec(0.0..1.0f64, 1..120),
        eps_loc in 0.0..4.0f64,
    ) {
        let rr: f64 = norms.iter().sum();
        let full = select_enrichment(&norms, rr, 0.0);
        for i in select_enrichment(&norms, rr, eps_loc) {
            prop_assert!(full.contains(&i));
        }
    }
}

#[test]
fn coarse_only_reduced_system_is_the_coarse_matrix() {
    let seq = common::small_sequence(4, 2);
    let ops = &seq.problems()[0].operators;
    let bases = empty_bases(seq.decomposition());
    let rs = reduced_assemble(ops, &bases).unwrap();
    let n0 = ops.coarse().dim();
    assert_eq!(rs.dim(), n0);
    for p in 0..n0 {
        for q in 0..n0 {
            assert_eq!(rs.get(p, q), ops.coarse_matrix()[p * n0 + q]);
        }
    }
    assert_eq!(rs.rhs(), ops.coarse_restrict(ops.rhs()).as_slice());
}

#[test]
fn reduced_update_matches_fresh_assembly() {
    let seq = common::small_sequence(4, 2);
    let ops = &seq.problems()[0].operators;
    let mut bases = empty_bases(seq.decomposition());
    let mut rs = reduced_assemble(ops, &bases).unwrap();
    let x = reduced_solve(&rs, ops, &bases).unwrap().iterate;
    let r = ops.matrix().residual(ops.rhs(), &x).unwrap();
    let all = enrich(&r, 0.0, ops, &mut bases, DEFAULT_DROP_TOL).unwrap();
    reduced_update(&mut rs, &all.grown, ops, &bases).unwrap();
    let fresh = reduced_assemble(ops, &bases).unwrap();
    assert_eq!(rs.columns(), fresh.columns());
    let scale = (0..rs.dim())
        .map(|c| rs.get(c, c).abs())
        .fold(0.0, f64::max);
    for p in 0..rs.dim() {
        for q in 0..=p {
            assert!((rs.get(p, q) - fresh.get(p, q)).abs() <= 1e-12 * scale);
        }
    }

    // enriching one subdomain leaves every previous entry bitwise unchanged
    let before = rs.clone();
    let x = reduced_solve(&rs, ops, &bases).unwrap().iterate;
    let r = ops.matrix().residual(ops.rhs(), &x).unwrap();
    let i = all.grown[0];
    let mut extra = bases.clone();
    let mut single = vec![extra[i].clone()];
    let y = ops
        .local_solve(i, &lrbas::linalg::restrict(&r, seq.decomposition().dofs(i)))
        .unwrap();
    assert!(single[0].try_append(&y, DEFAULT_DROP_TOL));
    extra[i] = single.pop().unwrap();
    reduced_update(&mut rs, &[i], ops, &extra).unwrap();
    assert_eq!(rs.dim(), before.dim() + 1);
    for p in 0..before.dim() {
        assert_eq!(rs.row(p), before.row(p));
    }
    let new = before.dim();
    for &(q, _) in rs.row(new) {
        let s = rs.columns()[q].subdomain();
        assert!(
            seq.decomposition().neighbors(i).contains(&s),
            "coupling to non-neighbor {s}"
        );
    }
}

#[test]
fn one_block_lrbas_converges_after_one_sweep() {
    let ops = common::one_block(12);
    let bases = empty_bases(ops.decomposition());
    let out = lrbas_solve_one(&ops, bases, &LrbasParams::default(), false).unwrap();
    assert_eq!(out.report.iterations, 1);
    assert_eq!(out.report.local_corrections, 1);
}

#[test]
fn same_system_twice_needs_no_enrichment() {
    let seq = common::small_sequence(4, 2);
    let ops = &seq.problems()[0].operators;
    let params = LrbasParams::default();
    let initial = empty_bases(seq.decomposition());
    let first = lrbas_solve_one(ops, initial.clone(), &params, false).unwrap();
    assert!(first.report.local_corrections > 0);
    let bases = transition_bases(initial, first, false, DEFAULT_DROP_TOL);
    let second = lrbas_solve_one(ops, bases, &params, false).unwrap();
    assert_eq!(second.report.local_corrections, 0);
    assert_eq!(second.report.iterations, 0);
}

#[test]
fn transition_dimensions() {
    let seq = common::small_sequence(4, 2);
    let ops = &seq.problems()[0].operators;
    let params = LrbasParams::default();
    let initial = empty_bases(seq.decomposition());
    let out = lrbas_solve_one(ops, initial.clone(), &params, false).unwrap();
    let full = transition_bases(initial.clone(), out.clone(), true, DEFAULT_DROP_TOL);
    for (b, f) in full.iter().zip(&out.bases) {
        assert_eq!(b.dim(), f.dim());
    }
    let kept = transition_bases(initial.clone(), out.clone(), false, DEFAULT_DROP_TOL);
    for i in 0..kept.len() {
        if out.grown[i] {
            assert!(kept[i].dim() <= initial[i].dim() + 1);
        } else {
            assert_eq!(kept[i].vectors(), initial[i].vectors());
        }
    }
    assert!(out.grown.iter().any(|&g| g));
}

#[test]
fn snapshot_guess_examples() {
    let seq = common::small_sequence(4, 2);
    let pou = seq.partition_of_unity();
    let ops = &seq.problems()[0].operators;
    let a = ops.matrix();
    let x1 = reference_solve_with_tol(a, ops.rhs(), 1e-14).unwrap();

    // no snapshots: coarse-only Galerkin solution
    let guess = pou_snapshot_guess(&[], ops, pou).unwrap();
    let bases = empty_bases(seq.decomposition());
    let coarse = reduced_solve(&reduced_assemble(ops, &bases).unwrap(), ops, &bases).unwrap();
    assert_eq!(guess, coarse.iterate);

    // the snapshot of the same system reproduces its solution
    let guess = pou_snapshot_guess(std::slice::from_ref(&x1), ops, pou).unwrap();
    let zero = vec![0.0; x1.len()];
    assert!(energy_error(a, &guess, &x1) <= 1e-8 * energy_error(a, &zero, &x1));

    // for a new system the guess is never worse than zero in the energy norm
    let ops2 = &seq.problems()[1].operators;
    let x2 = reference_solve_with_tol(ops2.matrix(), ops2.rhs(), 1e-14).unwrap();
    let guess = pou_snapshot_guess(&[x1], ops2, pou).unwrap();
    assert!(energy_error(ops2.matrix(), &guess, &x2) <= energy_error(ops2.matrix(), &zero, &x2));
}

#[test]
fn single_problem_sequence_converges() {
    let seq = repeated_sequence(2, 1);
    let report = run_sequence(&seq, &lrbas(0.25, false)).unwrap();
    assert_eq!(report.problems.len(), 1);
    assert!(report.problems[0].final_relative_residual <= 1e-6);
}

#[test]
fn one_block_pcg_takes_one_iteration() {
    let seq = repeated_sequence(1, 1);
    let params = SolverParams {
        strategy: Strategy::Pcg,
        ..SolverParams::default()
    };
    let report = run_sequence(&seq, &params).unwrap();
    assert_eq!(report.problems[0].iterations, 1);
    assert_eq!(report.problems[0].local_corrections, 1);
}

#[test]
fn identical_consecutive_systems_reuse_the_basis() {
    let seq = repeated_sequence(2, 2);
    for keep_full in [false, true] {
        let report = run_sequence(&seq, &lrbas(0.0, keep_full)).unwrap();
        assert!(report.problems[0].local_corrections > 0);
        assert_eq!(report.problems[1].local_corrections, 0);
    }
}

#[test]
fn counters_and_residuals_are_consistent() {
    let seq = common::small_sequence(4, 2);
    let strategies = [
        lrbas(0.0, false),
        lrbas(0.25, true),
        SolverParams {
            strategy: Strategy::PcgGuess,
            ..SolverParams::default()
        },
    ];
    for params in strategies {
        let report = run_sequence(&seq, &params).unwrap();
        let mut totals = (0, 0, 0);
        for (p, problem) in report.problems.iter().zip(seq.problems()) {
            assert_eq!(p.corrections.iter().sum::<usize>(), p.local_corrections);
            let ops = &problem.operators;
            let r = ops.matrix().residual(ops.rhs(), &p.solution).unwrap();
            let fresh = lrbas::linalg::norm2(&r) / lrbas::linalg::norm2(ops.rhs());
            assert!(
                (p.final_relative_residual - fresh).abs() <= 1e-13 * fresh,
                "{}",
                params.label()
            );
            totals.0 += p.iterations;
            totals.1 += p.local_corrections;
            totals.2 += p.coarse_solves;
        }
        assert_eq!(
            totals,
            (
                report.total_iterations,
                report.total_local_corrections,
                report.total_coarse_solves
            )
        );
    }
}
