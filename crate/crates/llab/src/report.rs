//! Deterministic report emission: pretty JSON for structured reports and
//! CSV for bulk numeric series. Every CSV has a header row; floats carry 17
//! significant digits so a round-trip through text is exact.

use crate::error::{LlabError, Result};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Format a float with 17 significant digits (shortest exact form would be
/// ambiguous across writers; a fixed width keeps outputs byte-stable).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".to_string() } else { "-inf".to_string() };
    }
    format!("{:.16e}", x)
}

/// A CSV table: one header row, rows of 17-significant-digit floats.
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable { header: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Pretty JSON with trailing newline; field order follows the struct.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| LlabError::Numerical(format!("report serialization failed: {e}")))?;
    write_text(path, &format!("{text}\n"))
}
