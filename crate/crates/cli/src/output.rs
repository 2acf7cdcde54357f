use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

use crate::failure::Failure;
use crate::spec::ModelSpec;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "tb";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

/// Fixed-header table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &'static [&'static str]) -> Self {
        Self { headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Failure::io("writing csv", e.into());
        w.write_record(self.headers).map_err(err)?;
        for row in &self.rows {
            w.write_record(row).map_err(err)?;
        }
        w.into_inner().map_err(|e| Failure::io("writing csv", e.into_error()))
    }
}

/// 17 significant digits; non-finite values become empty cells.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// Everything a command produces before it is written out.
#[derive(Debug)]
pub struct Outcome {
    pub command: &'static str,
    pub parameters: Value,
    pub result: Value,
    pub table: Table,
    pub plot: Option<String>,
    /// Number of rows or points that hit a domain error.
    pub failures: usize,
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub status: &'static str,
    pub model: &'a ModelSpec,
    pub parameters: &'a Value,
    pub result: &'a Value,
    /// Wall-clock time; the only field that differs between identical runs.
    pub duration_seconds: f64,
}

impl Outcome {
    pub fn report<'a>(&'a self, model: &'a ModelSpec, duration_seconds: f64) -> Report<'a> {
        Report {
            schema_version: SCHEMA_VERSION,
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            status: if self.failures == 0 { "ok" } else { "partial" },
            model,
            parameters: &self.parameters,
            result: &self.result,
            duration_seconds,
        }
    }
}

/// Writes the requested artifact to stdout, or into `out` together with the
/// JSON report when a directory is given.
pub fn emit(outcome: &Outcome, report: &Report<'_>, format: Format, out: Option<&Path>) -> Result<Vec<PathBuf>, Failure> {
    let mut json = serde_json::to_vec_pretty(report).map_err(|e| Failure::io("serializing report", e.into()))?;
    json.push(b'\n');
    let artifact = match format {
        Format::Json => None,
        Format::Csv => Some(("csv", outcome.table.to_csv()?)),
        Format::Svg => match &outcome.plot {
            Some(svg) => Some(("svg", svg.clone().into_bytes())),
            None => {
                return Err(Failure::spec(format!(
                    "--format svg is not available for the {} command",
                    outcome.command
                )))
            }
        },
    };
    let Some(dir) = out else {
        use std::io::Write;
        let bytes = artifact.map(|(_, b)| b).unwrap_or(json);
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(&bytes).map_err(|e| Failure::io("writing stdout", e))?;
        return Ok(Vec::new());
    };
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(&format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    let mut write = |ext: &str, bytes: &[u8]| -> Result<(), Failure> {
        let path = dir.join(format!("{}.{ext}", outcome.command));
        std::fs::write(&path, bytes).map_err(|e| Failure::io(&format!("writing {}", path.display()), e))?;
        written.push(path);
        Ok(())
    };
    write("json", &json)?;
    if let Some((ext, bytes)) = artifact {
        write(ext, &bytes)?;
    }
    Ok(written)
}
