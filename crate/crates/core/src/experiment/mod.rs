//! Configuration-driven experiment runner: builds the problem sequence,
//! runs a strategy and writes CSV/PGM report directories that can be
//! compared side by side.

mod artifacts;
mod compare;
mod config;

pub use artifacts::{
    load_report, read_layout_grid, read_pgm, read_residuals, read_summary, run, summary_rows,
    write_layout_grid, write_pgm, write_residuals, write_summary, RunArtifacts, SummaryRow,
    CONFIG_FILE, FAILED_MARKER, GENEO_FILE, REPORT_FILE, SUMMARY_FILE,
};
pub use compare::{compare, compare_reports, Comparison, ComparisonRow};
pub use config::{load_config, DecompositionConfig, ExperimentConfig, GridConfig, OutputConfig};
