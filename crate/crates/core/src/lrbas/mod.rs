//! Localized reduced basis enrichment, the PCG baselines and the driver that
//! runs a strategy over a sequence of problems.

mod basis;
mod pcg;
mod reduced;
mod sequence;
mod solver;

pub use basis::{empty_bases, LocalBasis, DEFAULT_DROP_TOL};
pub use pcg::{pcg, pou_snapshot_guess, PcgResult};
pub use reduced::{
    reduced_assemble, reduced_assemble_with_tol, reduced_solve, reduced_update, ReducedColumn,
    ReducedSolution, ReducedSystem, REDUCED_PIVOT_TOL,
};
pub use sequence::{
    run_sequence, ProblemReport, ProblemSequence, SequenceProblem, SolveReport, SolverParams,
    Strategy,
};
pub use solver::{
    enrich, local_residual_norms, lrbas_solve_one, select_enrichment, transition_bases, Enrichment,
    LrbasOutcome, LrbasParams, TraceStep,
};
