//! Result tables, manifests, error records and plot data.
//!
//! Numbers are written with the shortest representation that parses back to
//! the same `f64`, so every table round-trips exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use frontier_core::FrontierError;

use crate::config::ConfigError;

/// Version of the manifest and error-record layout.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "frontier";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("computation failed: {0}")]
    Compute(#[from] FrontierError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("malformed results table: {0}")]
    Table(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Compute(FrontierError::NonConvergence { .. }) => "NonConvergence",
            CliError::Compute(FrontierError::DegenerateInput(_)) => "DegenerateInput",
            CliError::Compute(FrontierError::Domain(_)) => "DomainError",
            CliError::Compute(FrontierError::GridMismatch(_)) => "GridMismatch",
            CliError::Io { .. } => "IoError",
            CliError::Table(_) => "TableError",
        }
    }

    /// Machine-readable form written to `error.json` and stderr.
    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            schema_version: SCHEMA_VERSION,
            kind: self.kind().into(),
            field: match self {
                CliError::Config(c) => Some(c.field.clone()),
                _ => None,
            },
            path: match self {
                CliError::Io { path, .. } => Some(path.display().to_string()),
                _ => None,
            },
            message: match self {
                CliError::Config(c) => c.message.clone(),
                other => other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub schema_version: u32,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub message: String,
}

/// Shortest round-trip text of a float, in exponent form for very small or large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// A string-valued table with a fixed header.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Cell `name` of row `i` parsed as a float; empty cells are `None`.
    pub fn f64_at(&self, i: usize, name: &str) -> Option<f64> {
        let j = self.column(name)?;
        self.rows.get(i)?.get(j)?.parse().ok()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_csv()).map_err(|e| CliError::io(path, e))
    }
}

/// Parses a results table, requiring a header and rows of equal width.
pub fn read_results_csv(text: &str) -> Result<Table, CliError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Table(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.is_empty() || columns.iter().all(|c| c.is_empty()) {
        return Err(CliError::Table("missing header".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Table(e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { columns, rows })
}

pub fn read_results_file(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    read_results_csv(&text)
}

/// How a result row was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Deterministic,
    MonteCarlo,
    Exact,
    Fit,
}

/// Provenance of one row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordProvenance {
    pub row: usize,
    pub method: Method,
    pub error_estimate: Option<f64>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub experiment: String,
    /// SHA-256 of the validated configuration; also the `run_id` of every row.
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub records: Vec<RecordProvenance>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifests serialize");
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}

/// Long-format plot table: one observation per row with a log2 column.
pub const PLOT_COLUMNS: [&str; 9] = [
    "run_id",
    "experiment",
    "series",
    "x_name",
    "x",
    "y",
    "log2_y",
    "y_error",
    "method",
];

/// Schema of the threshold-scan plot file.
pub const THRESHOLD_PLOT_COLUMNS: [&str; 5] = ["H0", "H_plus", "regime", "slope", "residual"];

/// log2 of a positive value, empty otherwise.
pub fn log2_cell(y: f64) -> String {
    if y > 0.0 && y.is_finite() {
        fmt_f64(y.log2())
    } else {
        String::new()
    }
}

/// Writes a plot-ready table to `<dir>/<name>.plot.csv` and returns the path.
pub fn emit_plot_data(dir: &Path, name: &str, results: &Table) -> Result<PathBuf, CliError> {
    if results.is_empty() {
        return Err(FrontierError::DegenerateInput(format!("no plot observations for {name}")).into());
    }
    let path = dir.join(format!("{name}.plot.csv"));
    results.write(&path)?;
    Ok(path)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
