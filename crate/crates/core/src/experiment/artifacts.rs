use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lrbas::{run_sequence, ProblemSequence, SolveReport};

use super::ExperimentConfig;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.json";
pub const GENEO_FILE: &str = "geneo_counts.csv";
pub const FAILED_MARKER: &str = "FAILED";

/// Files written by [`run`] and the report they describe.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub report: SolveReport,
}

/// One row of `summary.csv`; the totals row has `k = "total"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub k: String,
    pub iterations: usize,
    pub local_corrections: usize,
    pub coarse_solves: usize,
    pub final_relative_residual: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// `{:e}` prints the shortest digits that parse back to the same value.
fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn summary_rows(report: &SolveReport) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = report
        .problems
        .iter()
        .map(|p| SummaryRow {
            k: p.k.to_string(),
            iterations: p.iterations,
            local_corrections: p.local_corrections,
            coarse_solves: p.coarse_solves,
            final_relative_residual: p.final_relative_residual,
        })
        .collect();
    rows.push(SummaryRow {
        k: "total".into(),
        iterations: report.total_iterations,
        local_corrections: report.total_local_corrections,
        coarse_solves: report.total_coarse_solves,
        final_relative_residual: report
            .problems
            .iter()
            .map(|p| p.final_relative_residual)
            .fold(0.0, f64::max),
    });
    rows
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "k",
        "iterations",
        "local_corrections",
        "coarse_solves",
        "final_relative_residual",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.k.clone(),
            r.iterations.to_string(),
            r.local_corrections.to_string(),
            r.coarse_solves.to_string(),
            fmt_f64(r.final_relative_residual),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Integer grid in subdomain layout; row `y` of the layout is line `y`.
pub fn write_layout_grid(path: &Path, values: &[usize], layout: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = (0..layout).map(|x| format!("x{x}")).collect();
    w.write_record(&header).map_err(csv_err)?;
    for y in 0..layout {
        w.write_record(
            values[y * layout..(y + 1) * layout]
                .iter()
                .map(|v| v.to_string()),
        )
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_layout_grid(path: &Path) -> Result<Vec<usize>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in r.records() {
        for field in rec.map_err(csv_err)?.iter() {
            out.push(
                field
                    .parse()
                    .map_err(|e| Error::Parse(format!("{field}: {e}")))?,
            );
        }
    }
    Ok(out)
}

pub fn write_residuals(path: &Path, history: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["iteration", "relative_residual"])
        .map_err(csv_err)?;
    for (l, v) in history.iter().enumerate() {
        w.write_record([l.to_string(), fmt_f64(*v)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_residuals(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in r.deserialize::<(usize, f64)>() {
        out.push(rec.map_err(csv_err)?.1);
    }
    Ok(out)
}

/// 8-bit binary PGM of a `width x height` field stored bottom row first,
/// scaled linearly from its minimum to its maximum. The range is written to
/// a `.txt` sidecar. Returns both paths.
pub fn write_pgm(
    path: &Path,
    values: &[f64],
    width: usize,
    height: usize,
) -> Result<(PathBuf, PathBuf)> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            found: values.len(),
        });
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    for y in (0..height).rev() {
        for v in &values[y * width..(y + 1) * width] {
            let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
            bytes.push((t * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    fs::write(path, bytes)?;
    let sidecar = path.with_extension("txt");
    fs::write(
        &sidecar,
        format!("min {}\nmax {}\n", fmt_f64(lo), fmt_f64(hi)),
    )?;
    Ok((path.to_path_buf(), sidecar))
}

/// Parses a binary PGM written by [`write_pgm`]: `(width, height, pixels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let data = fs::read(path)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse(format!(
                "{}: truncated PGM header",
                path.display()
            )));
        }
        fields.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(Error::Parse(format!(
            "{}: not an 8-bit P5 image",
            path.display()
        )));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::Parse(format!("{s}: {e}")))
    };
    let (w, h) = (num(&fields[1])?, num(&fields[2])?);
    let pixels = data.get(pos..).unwrap_or_default().to_vec();
    if pixels.len() != w * h {
        return Err(Error::Parse(format!(
            "{}: expected {} pixels, found {}",
            path.display(),
            w * h,
            pixels.len()
        )));
    }
    Ok((w, h, pixels))
}

/// Builds the problem sequence, runs the configured strategy and writes the
/// report directory. On solver failure the artifacts of the problems solved
/// so far are kept, a `FAILED` marker is written and the error returned.
pub fn run(config: &ExperimentConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let dir = config.output.dir.clone();
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(dir.join(FAILED_MARKER));
    let mut files = Vec::new();

    let config_path = dir.join(CONFIG_FILE);
    fs::write(&config_path, config.to_json())?;
    files.push(config_path);

    let grid = config.grid()?;
    let d = &config.decomposition;
    let seq = ProblemSequence::build(
        &grid,
        &config.geometry,
        &config.schedule,
        d.subdomains,
        d.overlap,
        d.geneo_threshold,
    )?;
    let m = grid.elements_per_side();
    let geneo = dir.join(GENEO_FILE);
    write_layout_grid(
        &geneo,
        &seq.problems()[0].operators.coarse().counts(),
        d.subdomains,
    )?;
    files.push(geneo);
    for p in seq.problems() {
        let (img, side) = write_pgm(
            &dir.join(format!("sigma_{}.pgm", p.k)),
            p.sigma.values(),
            m,
            m,
        )?;
        files.extend([img, side]);
    }

    let (report, failure) = match run_sequence(&seq, &config.solver) {
        Ok(r) => (r, None),
        Err(Error::SequenceFailed {
            problem,
            source,
            partial,
        }) => (*partial, Some((problem, source))),
        Err(e) => return Err(e),
    };

    for p in &report.problems {
        let c = dir.join(format!("corrections_{}.csv", p.k));
        write_layout_grid(&c, &p.corrections, d.subdomains)?;
        let r = dir.join(format!("residuals_{}.csv", p.k));
        write_residuals(&r, &p.residual_history)?;
        let system = seq.problems()[p.k - 1].operators.system();
        let nodal = system.reconstruct(&p.solution);
        let (img, side) = write_pgm(
            &dir.join(format!("solution_{}.pgm", p.k)),
            &nodal,
            m + 1,
            m + 1,
        )?;
        files.extend([c, r, img, side]);
    }
    let summary = dir.join(SUMMARY_FILE);
    write_summary(&summary, &summary_rows(&report))?;
    files.push(summary);
    let json = dir.join(REPORT_FILE);
    fs::write(
        &json,
        serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?,
    )?;
    files.push(json);

    if let Some((problem, source)) = failure {
        let mut f = fs::File::create(dir.join(FAILED_MARKER))?;
        writeln!(f, "problem {problem}: {source}")?;
        return Err(Error::SequenceFailed {
            problem,
            source,
            partial: Box::new(report),
        });
    }
    Ok(RunArtifacts { dir, files, report })
}

/// Reads `report.json` and `config.json` from a report directory.
pub fn load_report(dir: &Path) -> Result<(ExperimentConfig, SolveReport)> {
    let cfg_text = fs::read_to_string(dir.join(CONFIG_FILE))
        .map_err(|e| Error::Config(format!("{}: {e}", dir.join(CONFIG_FILE).display())))?;
    let cfg = ExperimentConfig::from_json(&cfg_text)?;
    let rep_text = fs::read_to_string(dir.join(REPORT_FILE))
        .map_err(|e| Error::Config(format!("{}: {e}", dir.join(REPORT_FILE).display())))?;
    let report = serde_json::from_str(&rep_text)
        .map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
    Ok((cfg, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [1e-7, 0.1 + 0.2, 123456.789, 0.0, 2.5e-300] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        write_pgm(&p, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 3, 2).unwrap();
        let (w, h, px) = read_pgm(&p).unwrap();
        assert_eq!((w, h), (3, 2));
        // top row (y = 1) first
        assert_eq!(px, vec![153, 204, 255, 0, 51, 102]);
        let side = fs::read_to_string(p.with_extension("txt")).unwrap();
        assert_eq!(side, "min 0e0\nmax 5e0\n");
    }

    #[test]
    fn layout_grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let v: Vec<usize> = (0..9).collect();
        write_layout_grid(&p, &v, 3).unwrap();
        assert_eq!(read_layout_grid(&p).unwrap(), v);
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "x0,x1,x2\n0,1,2\n3,4,5\n6,7,8\n"
        );
    }
}
