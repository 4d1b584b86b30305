//! CSV input and output.
//!
//! Floats are written in scientific notation with 17 significant digits, which
//! round-trips every finite `f64` exactly.

use std::io::{Read, Write};
use std::path::Path;

use bandforge_core::data::Dataset;
use bandforge_core::density::DensityBand;
use bandforge_core::naive::BandResult;
use bandforge_core::sim::StudyResult;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Malformed(String),
    #[error("write failed: {0}")]
    Write(String),
}

impl From<csv::Error> for IoError {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => IoError::Write(e.to_string()),
            _ => IoError::Malformed(e.to_string()),
        }
    }
}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Write(e.to_string())
    }
}

/// `{:.16e}`: 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn open(path: &Path) -> Result<std::fs::File, IoError> {
    std::fs::File::open(path).map_err(|source| IoError::Open { path: path.display().to_string(), source })
}

/// Columns of a CSV whose header must equal `expected` exactly.
fn read_columns<R: Read>(reader: R, expected: &[&str]) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != expected {
        return Err(IoError::Malformed(format!("header must be '{}', got '{}'", expected.join(","), header.join(","))));
    }
    let mut cols = vec![Vec::new(); expected.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        if rec.len() != expected.len() {
            return Err(IoError::Malformed(format!(
                "line {row}: expected {} fields, got {}",
                expected.len(),
                rec.len()
            )));
        }
        for (k, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                IoError::Malformed(format!("line {row}, column {}: '{cell}' is not a number", expected[k]))
            })?;
            if !v.is_finite() {
                return Err(IoError::Malformed(format!("line {row}, column {}: value must be finite", expected[k])));
            }
            cols[k].push(v);
        }
    }
    Ok(cols)
}

/// Paired observations from CSV with header `x,y`.
pub fn read_xy<R: Read>(reader: R) -> Result<Dataset, IoError> {
    let mut cols = read_columns(reader, &["x", "y"])?;
    let y = cols.pop().unwrap_or_default();
    let x = cols.pop().unwrap_or_default();
    Dataset::new(x, y).map_err(|e| IoError::Malformed(e.to_string()))
}

pub fn read_xy_path(path: &Path) -> Result<Dataset, IoError> {
    read_xy(open(path)?)
}

/// Univariate sample from CSV with header `x`.
pub fn read_x<R: Read>(reader: R) -> Result<Vec<f64>, IoError> {
    let x = read_columns(reader, &["x"])?.pop().unwrap_or_default();
    if x.len() < 2 {
        return Err(IoError::Malformed(format!("need at least 2 rows, got {}", x.len())));
    }
    Ok(x)
}

pub fn read_x_path(path: &Path) -> Result<Vec<f64>, IoError> {
    read_x(open(path)?)
}

fn write_rows<W: Write>(writer: W, header: [&str; 4], rows: impl Iterator<Item = [f64; 4]>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.map(format_f64))?;
    }
    w.flush()?;
    Ok(())
}

/// `x,ghat,lower,upper`.
pub fn write_band<W: Write>(writer: W, band: &BandResult) -> Result<(), IoError> {
    let rows = (0..band.grid.len()).map(|j| [band.grid[j], band.center[j], band.lower[j], band.upper[j]]);
    write_rows(writer, ["x", "ghat", "lower", "upper"], rows)
}

/// `x,fhat,lower,upper`.
pub fn write_density_band<W: Write>(writer: W, band: &DensityBand) -> Result<(), IoError> {
    let rows = (0..band.grid.len()).map(|j| [band.grid[j], band.fhat[j], band.lower[j], band.upper[j]]);
    write_rows(writer, ["x", "fhat", "lower", "upper"], rows)
}

/// Rows of a band file, in column order.
pub fn read_band<R: Read>(reader: R) -> Result<Vec<[f64; 4]>, IoError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut row = [0.0; 4];
        for (k, cell) in rec.iter().enumerate().take(4) {
            row[k] = cell.parse().map_err(|_| IoError::Malformed(format!("'{cell}' is not a number")))?;
        }
        out.push(row);
    }
    Ok(out)
}

/// Header of the study results table.
pub const STUDY_COLUMNS: [&str; 7] =
    ["sigma", "g_index", "method", "factor_or_xi", "covered_proportion", "avg_abs_cov_error", "avg_width"];

/// One row of the study results table.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StudyRow {
    pub sigma: f64,
    pub g_index: u8,
    pub method: String,
    pub factor_or_xi: Option<f64>,
    pub covered_proportion: f64,
    pub avg_abs_cov_error: f64,
    pub avg_width: f64,
    pub completed: usize,
    pub failed: usize,
    pub aborted: bool,
}

pub fn study_rows(result: &StudyResult, sigma: f64, g_index: u8) -> Vec<StudyRow> {
    result
        .results
        .iter()
        .map(|r| StudyRow {
            sigma,
            g_index,
            method: r.kind.name().to_owned(),
            factor_or_xi: r.setting,
            covered_proportion: r.covered_proportion,
            avg_abs_cov_error: r.avg_abs_cov_error,
            avg_width: r.avg_width,
            completed: r.completed,
            failed: r.failed,
            aborted: r.aborted.is_some(),
        })
        .collect()
}

pub fn write_study_rows<W: Write>(writer: W, rows: &[StudyRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(STUDY_COLUMNS)?;
    for r in rows {
        w.write_record([
            format_f64(r.sigma),
            r.g_index.to_string(),
            r.method.clone(),
            r.factor_or_xi.map(format_f64).unwrap_or_default(),
            format_f64(r.covered_proportion),
            format_f64(r.avg_abs_cov_error),
            format_f64(r.avg_width),
        ])?;
    }
    w.flush()?;
    Ok(())
}
