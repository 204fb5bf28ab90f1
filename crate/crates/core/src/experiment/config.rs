use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{ChannelGeometry, Grid, ModificationSchedule};
use crate::lrbas::SolverParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// elements per side
    pub elements: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { elements: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecompositionConfig {
    /// subdomains per side
    pub subdomains: usize,
    /// overlap in elements
    pub overlap: usize,
    pub geneo_threshold: f64,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            subdomains: 10,
            overlap: 4,
            geneo_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("report"),
        }
    }
}

/// Complete experiment description. Every section is optional; the
/// defaults describe the 200 x 200 channel problem with five port changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub decomposition: DecompositionConfig,
    pub solver: SolverParams,
    pub geometry: ChannelGeometry,
    pub schedule: ModificationSchedule,
    pub output: OutputConfig,
    /// reserved; nothing is randomized
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Rejects values the solver cannot run with, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: String| Err(Error::Config(format!("{key}: {why}")));
        let m = self.grid.elements;
        if m < 2 {
            return bad("grid.elements", format!("must be at least 2, got {m}"));
        }
        let d = &self.decomposition;
        if d.subdomains == 0 || !m.is_multiple_of(d.subdomains) {
            return bad(
                "decomposition.subdomains",
                format!("{} does not divide grid.elements = {m}", d.subdomains),
            );
        }
        if d.overlap == 0 {
            return bad("decomposition.overlap", "must be at least 1".into());
        }
        if !(d.geneo_threshold >= 0.0) || !d.geneo_threshold.is_finite() {
            return bad(
                "decomposition.geneo_threshold",
                format!("must be finite and >= 0, got {}", d.geneo_threshold),
            );
        }
        let s = &self.solver;
        if !(s.eps > 0.0) {
            return bad("solver.eps", format!("must be positive, got {}", s.eps));
        }
        if !(s.eps_loc >= 0.0) || !s.eps_loc.is_finite() {
            return bad(
                "solver.eps_loc",
                format!("must be finite and >= 0, got {}", s.eps_loc),
            );
        }
        if s.max_iter == 0 {
            return bad("solver.max_iter", "must be at least 1".into());
        }
        self.geometry.validate()?;
        self.schedule.validate(&self.geometry)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.elements)
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
