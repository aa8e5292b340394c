use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{Error, Result};

/// Version of every CSV schema written by the runner.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    /// Property or gate the check asserts.
    pub property: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// The effective config, re-runnable as is.
    pub config: String,
    pub wall_time_s: f64,
    pub checks: Vec<Check>,
    pub results: serde_json::Value,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Writes `# schema: <name> v1`, a header row and the records.
pub fn write_csv<R, I>(dir: &Path, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let path = dir.join(format!("{name}.csv"));
    let io = |e: std::io::Error| Error::Invalid(format!("{}: {e}", path.display()));
    let mut file = File::create(&path).map_err(io)?;
    writeln!(file, "# schema: {name} v{CSV_SCHEMA_VERSION}").map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    let cerr = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(cerr)?;
    for r in rows {
        w.write_record(r).map_err(cerr)?;
    }
    w.flush().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(path)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Plain decimal rendering used in every CSV.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn ints(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn floats(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}
