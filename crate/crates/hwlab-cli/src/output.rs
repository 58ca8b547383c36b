//! Artifact emission. Reports are assembled fully in memory as CSV, then
//! written atomically; JSON mode reprints the same cells as a
//! `{header, rows}` document, so both formats carry identical
//! 17-significant-digit values.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use hwlab::report::write_atomic;
use hwlab::Result;
use serde_json::json;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Reprints CSV cells as JSON. Cells never contain commas or quotes:
/// every report column is a number, a boolean, or a fixed label.
pub fn csv_to_json(csv: &str) -> serde_json::Value {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    json!({ "header": header, "rows": rows })
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes the report (`stem.csv` or `stem.json`) and its metadata
/// sidecar (`stem.meta.json`), each atomically. Returns the report path.
pub fn emit(
    dir: &Path,
    stem: &str,
    format: Format,
    csv: &str,
    sidecar: &serde_json::Value,
) -> Result<PathBuf> {
    let report_path = dir.join(format!("{stem}.{}", format.extension()));
    let content = match format {
        Format::Csv => csv.to_string(),
        Format::Json => pretty(&csv_to_json(csv)),
    };
    write_atomic(&report_path, &content)?;
    write_atomic(&dir.join(format!("{stem}.meta.json")), &pretty(sidecar))?;
    Ok(report_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_reprints_as_header_and_rows() {
        let v = csv_to_json("a,b\n1,2\n3,4\n");
        assert_eq!(v["header"], json!(["a", "b"]));
        assert_eq!(v["rows"], json!([["1", "2"], ["3", "4"]]));
    }
}
