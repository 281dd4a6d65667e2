//! Report files and plot-ready tables.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::grid::{CellRecord, RunReport};
use crate::metrics::theta_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub index: usize,
    pub alpha: f64,
    pub lambda_s: f64,
    pub lambda_l: f64,
    pub support_size: Option<usize>,
    pub pairs: Option<usize>,
    pub latent_count: Option<usize>,
    pub support_error: Option<usize>,
    pub support_f1: Option<f64>,
    pub score: Option<f64>,
    pub spectral_error: Option<f64>,
    pub iterations: usize,
    pub runtime_secs: f64,
    pub converged: bool,
    pub primal: Option<f64>,
    pub eps_primal: Option<f64>,
    pub dual: Option<f64>,
    pub eps_dual: Option<f64>,
    pub error: Option<String>,
}

impl From<&CellRecord> for SummaryRow {
    fn from(c: &CellRecord) -> Self {
        SummaryRow {
            index: c.index,
            alpha: c.alpha,
            lambda_s: c.lambda_s,
            lambda_l: c.lambda_l,
            support_size: c.support_size,
            pairs: c.pairs,
            latent_count: c.latent_count,
            support_error: c.support_error,
            support_f1: c.support_f1,
            score: c.score,
            spectral_error: c.spectral_error,
            iterations: c.iterations,
            runtime_secs: c.runtime_secs,
            converged: c.converged,
            primal: c.residuals.map(|r| r.primal),
            eps_primal: c.residuals.map(|r| r.eps_primal),
            dual: c.residuals.map(|r| r.dual),
            eps_dual: c.residuals.map(|r| r.eps_dual),
            error: c.error.clone(),
        }
    }
}

pub fn summary(report: &RunReport) -> Vec<SummaryRow> {
    report.cells.iter().map(SummaryRow::from).collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<SummaryRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn write_report_json(report: &RunReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_report_json(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `m×m` 0/1 grid of the estimated support.
fn write_heatmap(cell: &CellRecord, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    if let Some(s) = &cell.support {
        let mask = s.mask();
        for i in 0..mask.nrows() {
            w.write_record(mask.row(i).iter().map(|v| format!("{}", *v as u8)))?;
        }
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_trace(cell: &CellRecord, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "rho", "step", "primal", "eps_primal", "dual", "eps_dual", "dual_standard", "dual_multiplier"])?;
    for t in &cell.trace {
        let r = &t.residuals;
        w.write_record(
            [t.iteration as f64, t.rho, t.step, r.primal, r.eps_primal, r.dual, r.eps_dual, r.dual_standard, r.dual_multiplier]
                .iter()
                .map(|v| v.to_string()),
        )?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_spectral_curve(cell: &CellRecord, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["theta", "relative_error"])?;
    for (t, e) in theta_grid(cell.spectral_curve.len()).iter().zip(&cell.spectral_curve) {
        w.write_record([t.to_string(), e.to_string()])?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

/// Writes the report (`report.json` or `report.csv`), a `summary.csv` table,
/// and per-cell plot data: `heatmaps/cell_XX.csv` support grids,
/// `traces/cell_XX.csv` residual histories and `spectra/cell_XX.csv` error
/// curves where those were recorded. Returns every path written.
pub fn emit(report: &RunReport, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();
    let rows = summary(report);
    match format {
        Format::Json => {
            let p = dir.join("report.json");
            write_report_json(report, &p)?;
            written.push(p);
        }
        Format::Csv => {
            let p = dir.join("report.csv");
            write_summary_csv(&rows, &p)?;
            written.push(p);
        }
    }
    let p = dir.join("summary.csv");
    write_summary_csv(&rows, &p)?;
    written.push(p);

    for cell in &report.cells {
        let name = format!("cell_{:02}.csv", cell.index);
        if cell.support.is_some() {
            let sub = dir.join("heatmaps");
            create_dir(&sub)?;
            write_heatmap(cell, &sub.join(&name))?;
            written.push(sub.join(&name));
        }
        if !cell.trace.is_empty() {
            let sub = dir.join("traces");
            create_dir(&sub)?;
            write_trace(cell, &sub.join(&name))?;
            written.push(sub.join(&name));
        }
        if !cell.spectral_curve.is_empty() {
            let sub = dir.join("spectra");
            create_dir(&sub)?;
            write_spectral_curve(cell, &sub.join(&name))?;
            written.push(sub.join(&name));
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{grid_search, Axis, GridOptions, GridSpec};
    use nalgebra::DMatrix;
    use recipgm::solver::SolverConfig;
    use recipgm::BandedBlockCirculant;

    #[test]
    fn empty_report_is_an_empty_array() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&RunReport::default(), dir.path(), Format::Json).unwrap();
        let text = fs::read_to_string(&files[0]).unwrap();
        assert_eq!(serde_json::from_str::<serde_json::Value>(&text).unwrap(), serde_json::json!([]));
        assert!(read_report_json(&files[0]).unwrap().is_empty());
    }

    fn small_report() -> RunReport {
        let sigma = BandedBlockCirculant::from_lags(
            6,
            &[DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]), DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.0, 0.2])],
        )
        .unwrap();
        let grid = GridSpec {
            lambda_s: Axis::new(0.5, 1.0, 2),
            lambda_l: Axis::new(1.0, 2.0, 2),
            alphas: vec![1.05],
            period: 6,
            order: 1,
            train: 10,
            test: 0,
        };
        let opts = GridOptions {
            keep_traces: true,
            ..Default::default()
        };
        grid_search(&sigma, &grid, &SolverConfig::default(), None, &opts).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let report = small_report();
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&report, dir.path(), Format::Json).unwrap();
        assert_eq!(read_report_json(&files[0]).unwrap(), report);
        let heatmaps = files.iter().filter(|p| p.starts_with(dir.path().join("heatmaps"))).count();
        let traces = files.iter().filter(|p| p.starts_with(dir.path().join("traces"))).count();
        assert_eq!((heatmaps, traces), (4, 4));
    }

    #[test]
    fn csv_round_trip() {
        let report = small_report();
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&report, dir.path(), Format::Csv).unwrap();
        assert_eq!(read_summary_csv(&files[0]).unwrap(), summary(&report));
        let trace = fs::read_to_string(dir.path().join("traces/cell_00.csv")).unwrap();
        assert_eq!(trace.lines().count(), report.cells[0].trace.len() + 1);
    }

    #[test]
    fn unwritable_directory_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit(&RunReport::default(), &blocker.join("out"), Format::Json).unwrap_err();
        assert!(format!("{err:#}").contains("file/out"));
    }
}
