use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lrbas::experiment::{compare, load_config, run, ExperimentConfig};
use lrbas::lrbas::Strategy;
use lrbas::Error;

#[derive(Parser)]
#[command(
    name = "lrbas",
    version,
    about = "Solve sequences of locally modified channel problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy over the problem sequence and write a report directory.
    Solve {
        /// JSON configuration; all keys optional
        #[arg(long)]
        config: Option<PathBuf>,
        /// pcg, pcg-guess or lrbas
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        eps_loc: Option<f64>,
        #[arg(long)]
        keep_full_bases: bool,
        /// elements per side
        #[arg(long)]
        grid: Option<usize>,
        /// subdomains per side
        #[arg(long)]
        subdomains: Option<usize>,
        #[arg(long)]
        overlap: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the totals of several report directories.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// also write comparison.csv and comparison.txt here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::NotConverged { .. } | Error::SequenceFailed { .. } | Error::ReducedNotPsd(_) => {
            ExitCode::from(2)
        }
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Solve {
            config,
            strategy,
            eps,
            eps_loc,
            keep_full_bases,
            grid,
            subdomains,
            overlap,
            out,
        } => (|| {
            let mut cfg = match config {
                Some(p) => load_config(&p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = strategy {
                cfg.solver.strategy = s;
            }
            if let Some(v) = eps {
                cfg.solver.eps = v;
            }
            if let Some(v) = eps_loc {
                cfg.solver.eps_loc = v;
            }
            if keep_full_bases {
                cfg.solver.keep_full = true;
            }
            if let Some(v) = grid {
                cfg.grid.elements = v;
            }
            if let Some(v) = subdomains {
                cfg.decomposition.subdomains = v;
            }
            if let Some(v) = overlap {
                cfg.decomposition.overlap = v;
            }
            if let Some(v) = out {
                cfg.output.dir = v;
            }
            cfg.validate()?;
            let art = run(&cfg)?;
            println!(
                "{}: {} iterations, {} local solves, {} coarse solves -> {}",
                cfg.solver.label(),
                art.report.total_iterations,
                art.report.total_local_corrections,
                art.report.total_coarse_solves,
                art.dir.display()
            );
            Ok(())
        })(),
        Command::Compare { reports, out } => (|| {
            let c = compare(&reports)?;
            print!("{}", c.to_text());
            if let Some(dir) = out {
                c.write(&dir)?;
            }
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
