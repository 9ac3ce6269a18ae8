//! Deterministic CSV and JSON emission.
//!
//! CSV files carry `#`-prefixed metadata lines, a header row and LF line
//! endings; numbers are printed with 17 significant digits so they
//! round-trip exactly. JSON summaries serialize structs in declaration
//! order, which keeps the key order stable across runs.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// 17 significant digits.
pub fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub struct CsvFile {
    path: PathBuf,
    metadata: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvFile {
    pub fn new(path: PathBuf, header: &[&str]) -> Self {
        Self {
            path,
            metadata: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(path: PathBuf, header: Vec<String>) -> Self {
        Self { path, metadata: Vec::new(), header, rows: Vec::new() }
    }

    pub fn meta(&mut self, line: impl Into<String>) {
        self.metadata.push(line.into());
    }

    pub fn row(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|v| fmt(*v)).collect());
    }

    pub fn row_strings(&mut self, values: Vec<String>) {
        self.rows.push(values);
    }

    pub fn write(self) -> Result<PathBuf, CliError> {
        let mut buf = String::new();
        for m in &self.metadata {
            buf.push_str("# ");
            buf.push_str(m);
            buf.push('\n');
        }
        buf.push_str(&self.header.join(","));
        buf.push('\n');
        for row in &self.rows {
            buf.push_str(&row.join(","));
            buf.push('\n');
        }
        std::fs::write(&self.path, buf)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", self.path.display())))?;
        Ok(self.path)
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("summary serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Minimal gnuplot script plotting the listed columns of a CSV against its
/// first column.
pub fn write_gnuplot(
    path: &Path,
    csv_name: &str,
    title: &str,
    columns: &[(usize, &str)],
) -> Result<(), CliError> {
    let mut script = String::new();
    script.push_str("set datafile separator ','\n");
    script.push_str(&format!("set title '{title}'\n"));
    script.push_str("set grid\n");
    let plots: Vec<String> = columns
        .iter()
        .map(|(col, label)| format!("'{csv_name}' using 1:{col} with lines title '{label}'"))
        .collect();
    script.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    script.push_str("pause -1\n");
    std::fs::write(path, script)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"")
        .map_err(|e| CliError::Config(format!("output directory {} not writable: {e}", dir.display())))?;
    let _ = std::fs::remove_file(probe);
    Ok(())
}

/// Print a short completion note to stderr (stdout stays machine friendly).
pub fn note(msg: &str) {
    let _ = writeln!(std::io::stderr(), "{msg}");
}
