//! CSV and JSON output.
//!
//! Every float is written with 17 significant digits, so reading a file back
//! reproduces the values bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::diagnostics::{DiagnosticsRow, DiagnosticsSeries};
use crate::experiments::{ModelComparison, NuSweepResult, OslSurface, SweepResult};
use crate::grid::{Grid1D, ScalarField};
use crate::hyperbolic::{RunExtremes, RunResult, Snapshot};

pub const SNAPSHOT_COLUMNS: [&str; 5] = ["x", "q", "o", "W", "V"];

#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct IoError {
    pub path: PathBuf,
    pub message: String,
}

impl IoError {
    fn new(path: &Path, e: impl ToString) -> Self {
        Self {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

pub type IoResult<T> = std::result::Result<T, IoError>;

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> IoResult<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| IoError::new(dir, e))?;
    }
    let file = File::create(path).map_err(|e| IoError::new(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> IoResult<()>
where
    I: IntoIterator,
    I::Item: IntoIterator<Item = f64>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| IoError::new(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().map(format_float))
            .map_err(|e| IoError::new(path, e))?;
    }
    w.flush().map_err(|e| IoError::new(path, e))
}

/// Columns `x, q, o, W, V`.
pub fn write_snapshot_csv(snapshot: &Snapshot, path: &Path) -> IoResult<()> {
    let grid = snapshot.q.grid();
    let rows = (0..snapshot.q.len()).map(|i| {
        [
            grid.center(i as isize),
            snapshot.q.values()[i],
            snapshot.o.values()[i],
            snapshot.w.values()[i],
            snapshot.v.values()[i],
        ]
    });
    write_rows(path, &SNAPSHOT_COLUMNS, rows)
}

/// One row per recorded step, columns as in [`DiagnosticsRow::COLUMNS`].
pub fn write_series_csv(series: &DiagnosticsSeries, path: &Path) -> IoResult<()> {
    write_rows(path, &DiagnosticsRow::COLUMNS, series.rows().map(|r| r.as_array()))
}

/// Named columns read back from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

pub fn read_csv(path: &Path) -> IoResult<CsvTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| IoError::new(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| IoError::new(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut columns = vec![Vec::new(); header.len()];
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| IoError::new(path, e))?;
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field
                .trim()
                .parse()
                .map_err(|_| IoError::new(path, format!("row {}: \"{field}\" is not a number", line + 2)))?;
            columns[col].push(value);
        }
    }
    Ok(CsvTable { header, columns })
}

/// Rebuilds the `q, o, W, V` fields of a snapshot file on `grid`.
pub fn read_snapshot_csv(path: &Path, grid: Grid1D) -> IoResult<[ScalarField; 4]> {
    let table = read_csv(path)?;
    let get = |name: &str| -> IoResult<ScalarField> {
        let col = table
            .column(name)
            .ok_or_else(|| IoError::new(path, format!("missing column {name}")))?;
        ScalarField::from_values(grid, col.to_vec()).map_err(|e| IoError::new(path, e))
    };
    Ok([get("q")?, get("o")?, get("W")?, get("V")?])
}

/// `(x, q)` nodes of a piecewise-linear initial datum, columns `x, q`.
pub fn read_table(path: &Path) -> IoResult<(Vec<f64>, Vec<f64>)> {
    let t = read_csv(path)?;
    match (t.column("x"), t.column("q")) {
        (Some(x), Some(q)) => Ok((x.to_vec(), q.to_vec())),
        _ => Err(IoError::new(path, "expected columns x and q")),
    }
}

/// Pass/fail booleans written into run summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunChecks {
    /// Relative mass drift at most `1e-10`.
    pub mass_conserved: bool,
    /// `min(o - q) > 0` at every recorded step.
    pub below_obstacle: bool,
    /// `min q >= -1e-12`.
    pub nonnegative: bool,
    /// `TV(q(t)) <= 10 TV(q0)`.
    pub bv_bounded: bool,
}

impl RunChecks {
    pub fn of(run: &RunResult) -> Self {
        let e = &run.extremes;
        let tv0 = run.series.tv.first().copied().unwrap_or(0.0);
        Self {
            mass_conserved: e.max_rel_mass_drift <= 1e-10,
            below_obstacle: e.min_clearance > 0.0,
            nonnegative: e.min_q >= -1e-12,
            bv_bounded: e.max_tv <= 10.0 * tv0 + 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<'a> {
    pub config: &'a Value,
    pub label: String,
    pub step_count: usize,
    pub wall_time: f64,
    pub final_time: f64,
    pub initial_mass: f64,
    pub final_row: Option<DiagnosticsRow>,
    pub extremes: RunExtremes,
    pub checks: RunChecks,
}

impl<'a> RunSummary<'a> {
    pub fn new(config: &'a Value, label: impl Into<String>, run: &RunResult) -> Self {
        Self {
            config,
            label: label.into(),
            step_count: run.step_count,
            wall_time: run.wall_time.as_secs_f64(),
            final_time: run.final_time,
            initial_mass: run.initial_mass,
            final_row: run.series.last(),
            extremes: run.extremes,
            checks: RunChecks::of(run),
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> IoResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| IoError::new(dir, e))?;
    }
    let file = File::create(path).map_err(|e| IoError::new(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| IoError::new(path, e))?;
    w.write_all(b"\n").map_err(|e| IoError::new(path, e))?;
    w.flush().map_err(|e| IoError::new(path, e))
}

pub fn write_summary_json(summary: &RunSummary<'_>, path: &Path) -> IoResult<()> {
    write_json(summary, path)
}

/// File stem for a snapshot time, e.g. `t1.5000`.
pub fn time_tag(t: f64) -> String {
    format!("t{t:.4}")
}

/// Snapshots, series and summary of one run under `dir` with prefix `label`.
pub fn write_run_bundle(run: &RunResult, config: &Value, dir: &Path, label: &str, csv: bool, json: bool) -> IoResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    if csv {
        for s in &run.snapshots {
            let p = dir.join(format!("{label}_{}.csv", time_tag(s.time)));
            write_snapshot_csv(s, &p)?;
            written.push(p);
        }
        let p = dir.join(format!("{label}_series.csv"));
        write_series_csv(&run.series, &p)?;
        written.push(p);
    }
    if json {
        let p = dir.join(format!("{label}_summary.json"));
        write_summary_json(&RunSummary::new(config, label, run), &p)?;
        written.push(p);
    }
    Ok(written)
}

/// Member bundles plus `distances.csv` with columns `time, k, value_k,
/// value_k1, d_k`.
pub fn write_eps_sweep(sweep: &SweepResult, config: &Value, dir: &Path, csv: bool, json: bool) -> IoResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (k, (eps, run)) in sweep.values.iter().zip(&sweep.runs).enumerate() {
        let label = format!("eps{k}_{}", format_tag(*eps));
        written.extend(write_run_bundle(run, config, dir, &label, csv, json)?);
    }
    let p = dir.join("distances.csv");
    let rows = sweep.times.iter().enumerate().flat_map(|(ti, &t)| {
        sweep.successive(ti).into_iter().enumerate().map(move |(k, d)| {
            [t, k as f64, sweep.values[k], sweep.values[k + 1], d]
        })
    });
    write_rows(&p, &["time", "k", "param_k", "param_k1", "l1"], rows)?;
    written.push(p);
    Ok(written)
}

fn format_tag(x: f64) -> String {
    format!("{x:.6e}")
}

/// Distances of each viscous member to the hyperbolic run: columns
/// `time, nu, l1`.
pub fn write_nu_sweep(sweep: &NuSweepResult, config: &Value, dir: &Path, csv: bool, json: bool) -> IoResult<Vec<PathBuf>> {
    let mut written = write_run_bundle(&sweep.hyperbolic, config, dir, "hyperbolic", csv, json)?;
    for (k, (nu, r)) in sweep.values.iter().zip(&sweep.runs).enumerate() {
        let label = format!("nu{k}_{}", format_tag(*nu));
        written.extend(write_run_bundle(&r.run, config, dir, &label, csv, json)?);
    }
    let p = dir.join("nu_distances.csv");
    let rows = sweep.times.iter().enumerate().flat_map(|(ti, &t)| {
        sweep.values.iter().zip(&sweep.distances[ti]).map(move |(nu, d)| [t, *nu, *d])
    });
    write_rows(&p, &["time", "nu", "l1"], rows)?;
    written.push(p);
    Ok(written)
}

/// Member bundles plus `comparison.csv` with columns
/// `model, time, front, min_clearance, tv` (model as its index 0..3).
pub fn write_comparison(c: &ModelComparison, config: &Value, dir: &Path, csv: bool, json: bool) -> IoResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (m, run) in &c.runs {
        written.extend(write_run_bundle(run, config, dir, m.label(), csv, json)?);
    }
    let p = dir.join("comparison.csv");
    let mut w = writer(&p)?;
    w.write_record(["model", "time", "front", "min_clearance", "tv"])
        .map_err(|e| IoError::new(&p, e))?;
    for r in &c.table {
        w.write_record([
            r.model_label().to_string(),
            format_float(r.time),
            format_float(r.front),
            format_float(r.min_clearance),
            format_float(r.tv),
        ])
        .map_err(|e| IoError::new(&p, e))?;
    }
    w.flush().map_err(|e| IoError::new(&p, e))?;
    written.push(p);
    Ok(written)
}

trait ModelLabel {
    fn model_label(&self) -> &'static str;
}

impl ModelLabel for crate::experiments::ComparisonRow {
    fn model_label(&self) -> &'static str {
        self.model.label()
    }
}

/// `surface_q.csv` and `surface_v.csv`: first column `t`, then one column
/// per cell headed by its center.
pub fn write_surface(s: &OslSurface, dir: &Path) -> IoResult<Vec<PathBuf>> {
    let mut header = vec!["t".to_string()];
    header.extend(s.x.iter().map(|x| format_float(*x)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut written = Vec::new();
    for (name, data) in [("surface_q.csv", &s.q), ("surface_v.csv", &s.v)] {
        let p = dir.join(name);
        let rows = s.times.iter().zip(data.iter()).map(|(t, row)| std::iter::once(*t).chain(row.iter().copied()));
        write_rows(&p, &header, rows)?;
        written.push(p);
    }
    Ok(written)
}
