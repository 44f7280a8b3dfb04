//! CSV artifacts. Each file starts with a `# schema: <name> v<version>`
//! comment line followed by a fixed header row.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: u64,
    pub loss: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub x: f64,
    pub y: f64,
    /// Empty when the correlation is undefined at this point.
    pub cna: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epoch: u64,
    pub bin: usize,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub metric: String,
    pub group: String,
    pub rho: Option<f64>,
    pub n: usize,
}

pub const TRAJECTORY_SCHEMA: &str = "cna-trajectory";
pub const LANDSCAPE_SCHEMA: &str = "cna-landscape";
pub const CURVES_SCHEMA: &str = "cna-curves";
pub const REPORT_SCHEMA: &str = "cna-report";

pub fn write_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# schema: {schema} v{SCHEMA_VERSION}").expect("write to memory");
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(|e| CliError::output(path, e))?;
        }
        w.flush().map_err(|e| CliError::output(path, e))?;
    }
    if rows.is_empty() {
        return Err(CliError::Output(format!("{}: no rows to write", path.display())));
    }
    crate::fsutil::write_atomic(path, &buf)
}

/// Reads a file written by [`write_csv`], checking its schema line.
pub fn read_csv<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let expected = format!("# schema: {schema} v{SCHEMA_VERSION}");
    if text.lines().next() != Some(expected.as_str()) {
        return Err(CliError::Data(format!("{}: missing schema line `{expected}`", path.display())));
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
