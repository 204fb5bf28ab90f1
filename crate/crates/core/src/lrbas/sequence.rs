use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decomposition::{
    build_decomposition, build_partition_of_unity, detect_changed_subdomains, Decomposition,
    PartitionOfUnity, SchwarzOperators,
};
use crate::error::{Error, Result};
use crate::fem::{
    assemble, schedule_fields, ChannelGeometry, CoefficientField, ElementSet, Grid,
    ModificationSchedule,
};

use super::{
    empty_bases, lrbas_solve_one, pcg, pou_snapshot_guess, transition_bases, LrbasParams,
    DEFAULT_DROP_TOL,
};

/// Solution strategy for the whole sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// two-level additive Schwarz PCG from a zero initial guess
    Pcg,
    /// the same from a snapshot-based initial guess
    PcgGuess,
    Lrbas,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Pcg => "pcg",
            Strategy::PcgGuess => "pcg-guess",
            Strategy::Lrbas => "lrbas",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcg" => Ok(Strategy::Pcg),
            "pcg-guess" => Ok(Strategy::PcgGuess),
            "lrbas" => Ok(Strategy::Lrbas),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected pcg, pcg-guess or lrbas)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub strategy: Strategy,
    pub eps: f64,
    pub eps_loc: f64,
    pub keep_full: bool,
    pub max_iter: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            strategy: Strategy::Lrbas,
            eps: 1e-6,
            eps_loc: 0.25,
            keep_full: false,
            max_iter: 200,
        }
    }
}

impl SolverParams {
    /// Row label used in comparisons.
    pub fn label(&self) -> String {
        match self.strategy {
            Strategy::Lrbas => format!(
                "lrbas eps_loc={}{}",
                self.eps_loc,
                if self.keep_full { " keep-full" } else { "" }
            ),
            s => s.to_string(),
        }
    }
}

/// Per-problem entry of a [`SolveReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    pub k: usize,
    pub iterations: usize,
    /// relative residual after each reduced solve / PCG step, initial first
    pub residual_history: Vec<f64>,
    /// local solves per subdomain
    pub corrections: Vec<usize>,
    pub local_corrections: usize,
    pub coarse_solves: usize,
    pub final_relative_residual: f64,
    #[serde(skip)]
    pub solution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub params: SolverParams,
    pub problems: Vec<ProblemReport>,
    pub total_iterations: usize,
    pub total_local_corrections: usize,
    pub total_coarse_solves: usize,
}

impl SolveReport {
    pub fn new(params: SolverParams) -> Self {
        Self {
            params,
            problems: Vec::new(),
            total_iterations: 0,
            total_local_corrections: 0,
            total_coarse_solves: 0,
        }
    }

    pub fn push(&mut self, p: ProblemReport) {
        self.total_iterations += p.iterations;
        self.total_local_corrections += p.local_corrections;
        self.total_coarse_solves += p.coarse_solves;
        self.problems.push(p);
    }
}

/// One problem of a [`ProblemSequence`].
#[derive(Debug, Clone)]
pub struct SequenceProblem {
    pub k: usize,
    pub sigma: CoefficientField,
    /// elements changed relative to the previous problem
    pub changed_elements: ElementSet,
    /// subdomains whose local operators were rebuilt
    pub changed_subdomains: Vec<usize>,
    pub operators: Arc<SchwarzOperators>,
}

/// Systems, decomposition and Schwarz operators of `k = 1..K`, shared by
/// every strategy.
#[derive(Debug, Clone)]
pub struct ProblemSequence {
    dec: Arc<Decomposition>,
    pou: PartitionOfUnity,
    problems: Vec<SequenceProblem>,
}

impl ProblemSequence {
    /// The channel problem for every step of `schedule`.
    pub fn build(
        grid: &Grid,
        geometry: &ChannelGeometry,
        schedule: &ModificationSchedule,
        layout: usize,
        overlap: usize,
        geneo_threshold: f64,
    ) -> Result<Self> {
        geometry.validate()?;
        schedule.validate(geometry)?;
        let dec = Arc::new(build_decomposition(grid, layout, overlap)?);
        let fields = schedule_fields(geometry, schedule, grid);
        let list = fields.into_iter().map(|f| (f.field, f.changed)).collect();
        Self::from_fields(dec, list, geneo_threshold)
    }

    /// Sequence over given coefficient fields. The first problem's operators
    /// are built from scratch; later ones are updated on the subdomains
    /// touched by elements that differ from the previous field.
    pub fn from_fields(
        dec: Arc<Decomposition>,
        fields: Vec<(CoefficientField, ElementSet)>,
        geneo_threshold: f64,
    ) -> Result<Self> {
        let pou = build_partition_of_unity(&dec);
        let grid = *dec.grid();
        let mut problems: Vec<SequenceProblem> = Vec::with_capacity(fields.len());
        for (idx, (sigma, changed_elements)) in fields.into_iter().enumerate() {
            let k = idx + 1;
            let system = Arc::new(assemble(&grid, &sigma)?);
            let (operators, changed_subdomains) = match problems.last() {
                None => {
                    let ops = SchwarzOperators::build(
                        k,
                        system,
                        &sigma,
                        dec.clone(),
                        &pou,
                        geneo_threshold,
                    )?;
                    (ops, (0..dec.len()).collect())
                }
                Some(prev) => {
                    let diff = sigma.diff(&prev.sigma);
                    let changed = detect_changed_subdomains(&diff, &dec);
                    (
                        prev.operators.update(k, system, &sigma, &pou, &changed)?,
                        changed,
                    )
                }
            };
            log::info!(
                "problem {k}: {} subdomains rebuilt",
                changed_subdomains.len()
            );
            problems.push(SequenceProblem {
                k,
                sigma,
                changed_elements,
                changed_subdomains,
                operators: Arc::new(operators),
            });
        }
        Ok(Self { dec, pou, problems })
    }

    pub fn decomposition(&self) -> &Arc<Decomposition> {
        &self.dec
    }

    pub fn partition_of_unity(&self) -> &PartitionOfUnity {
        &self.pou
    }

    pub fn problems(&self) -> &[SequenceProblem] {
        &self.problems
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }
}

fn with_problem(e: Error, k: usize) -> Error {
    match e {
        Error::NotConverged {
            solver,
            iterations,
            relative_residual,
            ..
        } => Error::NotConverged {
            solver,
            problem: k,
            iterations,
            relative_residual,
        },
        other => other,
    }
}

/// Runs one strategy over the whole sequence. On failure the error carries
/// the report of the problems solved so far.
pub fn run_sequence(seq: &ProblemSequence, params: &SolverParams) -> Result<SolveReport> {
    let mut report = SolveReport::new(*params);
    let n_sub = seq.dec.len();
    let mut previous: Vec<Vec<f64>> = Vec::new();
    let mut bases = empty_bases(&seq.dec);
    let lrbas = LrbasParams {
        eps: params.eps,
        eps_loc: params.eps_loc,
        max_iter: params.max_iter,
        ..LrbasParams::default()
    };
    for p in &seq.problems {
        let ops = &p.operators;
        let result = match params.strategy {
            Strategy::Pcg | Strategy::PcgGuess => {
                let x0 = if params.strategy == Strategy::PcgGuess {
                    pou_snapshot_guess(&previous, ops, &seq.pou)
                } else {
                    Ok(vec![0.0; ops.matrix().dim()])
                };
                x0.and_then(|x0| {
                    pcg(
                        ops.matrix(),
                        ops.rhs(),
                        |r| ops.apply(p.k, r),
                        &x0,
                        params.eps,
                        params.max_iter,
                    )
                })
                .map(|res| {
                    // every preconditioner application solves on all subdomains
                    let coarse_per = usize::from(ops.coarse().dim() > 0);
                    ProblemReport {
                        k: p.k,
                        iterations: res.iterations,
                        corrections: vec![res.applications; n_sub],
                        local_corrections: res.applications * n_sub,
                        coarse_solves: res.applications * coarse_per,
                        final_relative_residual: *res.residual_history.last().unwrap(),
                        residual_history: res.residual_history,
                        solution: res.x,
                    }
                })
            }
            Strategy::Lrbas => {
                let initial = bases.clone();
                lrbas_solve_one(ops, std::mem::take(&mut bases), &lrbas, false).map(|outcome| {
                    let pr = outcome.report.clone();
                    bases = transition_bases(initial, outcome, params.keep_full, DEFAULT_DROP_TOL);
                    pr
                })
            }
        };
        match result {
            Ok(pr) => {
                log::info!(
                    "{} k={}: {} iterations, {} local solves",
                    params.label(),
                    p.k,
                    pr.iterations,
                    pr.local_corrections
                );
                previous.push(pr.solution.clone());
                report.push(pr);
            }
            Err(e) => {
                return Err(Error::SequenceFailed {
                    problem: p.k,
                    source: Box::new(with_problem(e, p.k)),
                    partial: Box::new(report),
                })
            }
        }
    }
    Ok(report)
}
