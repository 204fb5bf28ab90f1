use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lrbas::{SolveReport, SolverParams, Strategy};

use super::{load_report, ExperimentConfig};

/// One strategy's totals.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub params: SolverParams,
    pub iterations: usize,
    pub local_solutions: usize,
    pub coarse_solves: usize,
}

/// Totals of several runs over the same problem sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// (label, local solutions at `eps_loc > 0` / at `eps_loc = 0`) for each
    /// LRBAS pair sharing the basis transition mode
    pub correction_ratios: Vec<(String, f64)>,
}

fn order_key(p: &SolverParams) -> (u8, bool, f64) {
    let s = match p.strategy {
        Strategy::Pcg => 0,
        Strategy::PcgGuess => 1,
        Strategy::Lrbas => 2,
    };
    (s, p.keep_full, p.eps_loc)
}

/// The configuration sections that define the problem sequence.
fn problem_signature(c: &ExperimentConfig) -> String {
    serde_json::json!({
        "grid": c.grid,
        "decomposition": c.decomposition,
        "geometry": c.geometry,
        "schedule": c.schedule,
        "eps": c.solver.eps,
    })
    .to_string()
}

/// Compares reports that solved the same sequence; rows follow the order
/// PCG, PCG with guess, LRBAS (bases reduced to the solution, then full
/// bases), each by increasing `eps_loc`.
pub fn compare_reports(reports: &[(ExperimentConfig, SolveReport)]) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::Config("compare needs at least two reports".into()));
    }
    let sig = problem_signature(&reports[0].0);
    for (i, (c, _)) in reports.iter().enumerate().skip(1) {
        if problem_signature(c) != sig {
            return Err(Error::Config(format!(
                "report {i} was run on a different problem configuration than report 0"
            )));
        }
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|(_, r)| ComparisonRow {
            label: r.params.label(),
            params: r.params,
            iterations: r.total_iterations,
            local_solutions: r.total_local_corrections,
            coarse_solves: r.total_coarse_solves,
        })
        .collect();
    rows.sort_by(|a, b| {
        order_key(&a.params)
            .partial_cmp(&order_key(&b.params))
            .unwrap()
    });
    let mut correction_ratios = Vec::new();
    for keep in [false, true] {
        let lr = |pred: &dyn Fn(f64) -> bool| {
            rows.iter().find(|r| {
                r.params.strategy == Strategy::Lrbas
                    && r.params.keep_full == keep
                    && pred(r.params.eps_loc)
            })
        };
        if let Some(base) = lr(&|e| e == 0.0) {
            for r in rows.iter().filter(|r| {
                r.params.strategy == Strategy::Lrbas
                    && r.params.keep_full == keep
                    && r.params.eps_loc > 0.0
            }) {
                if base.local_solutions > 0 {
                    correction_ratios.push((
                        format!("{} / {}", r.label, base.label),
                        r.local_solutions as f64 / base.local_solutions as f64,
                    ));
                }
            }
        }
    }
    Ok(Comparison {
        rows,
        correction_ratios,
    })
}

/// Loads every report directory and compares them.
pub fn compare(dirs: &[PathBuf]) -> Result<Comparison> {
    let reports = dirs
        .iter()
        .map(|d| load_report(d))
        .collect::<Result<Vec<_>>>()?;
    compare_reports(&reports)
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("strategy,iterations,local_solutions,coarse_solves\n");
        for r in &self.rows {
            s += &format!(
                "{},{},{},{}\n",
                r.label, r.iterations, r.local_solutions, r.coarse_solves
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let head = ["strategy", "iterations", "local solutions", "coarse solves"];
        let body: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.label.clone(),
                    r.iterations.to_string(),
                    r.local_solutions.to_string(),
                    r.coarse_solves.to_string(),
                ]
            })
            .collect();
        let mut width = head.map(str::len);
        for row in &body {
            for (w, c) in width.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: [&str; 4]| {
            format!(
                "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}\n",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                w0 = width[0],
                w1 = width[1],
                w2 = width[2],
                w3 = width[3]
            )
        };
        let mut s = line(head);
        for row in &body {
            s += &line([&row[0], &row[1], &row[2], &row[3]]);
        }
        for (label, ratio) in &self.correction_ratios {
            s += &format!("local solutions {label}: {ratio:.3}\n");
        }
        s
    }

    /// Writes `comparison.csv` and `comparison.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("comparison.csv"), self.to_csv())?;
        std::fs::write(dir.join("comparison.txt"), self.to_text())?;
        Ok(())
    }
}
