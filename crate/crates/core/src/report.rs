//! Structured result summaries and the diagnostics table.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Result, ZkError};

pub const BASE_COLUMNS: [&str; 7] = ["t", "M", "E", "S_c", "c", "rho", "v_norm"];

/// Summary of one run. Keys are emitted in sorted order so identical runs
/// give identical bytes.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub subcommand: String,
    pub config_hash: String,
    pub version: String,
    pub results: Value,
}

impl Report {
    pub fn new(subcommand: &str, config_hash: &str, results: impl Serialize) -> Result<Self> {
        Ok(Self {
            subcommand: subcommand.into(),
            config_hash: config_hash.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            results: serde_json::to_value(results).map_err(|e| ZkError::Format(e.to_string()))?,
        })
    }

    pub fn render(&self) -> Result<String> {
        // round-trip through Value so every nested map is key-sorted
        let v = serde_json::to_value(self).map_err(|e| ZkError::Format(e.to_string()))?;
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| ZkError::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()?)?;
        Ok(())
    }
}

/// Diagnostics table with the fixed leading columns and any number of
/// coefficient columns. Missing values are empty cells.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    pub coefficient_names: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Diagnostics {
    pub fn new(coefficient_names: Vec<String>) -> Self {
        Self {
            coefficient_names,
            rows: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        BASE_COLUMNS.len() + self.coefficient_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) -> Result<()> {
        if row.len() != self.width() {
            return Err(ZkError::ShapeMismatch(format!(
                "row of {} cells for {} columns",
                row.len(),
                self.width()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = BASE_COLUMNS
            .iter()
            .copied()
            .chain(self.coefficient_names.iter().map(String::as_str))
            .collect();
        let csv_err = |e: csv::Error| ZkError::Format(e.to_string());
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.map_or(String::new(), |v| format!("{v:e}"))).collect();
            w.write_record(&cells).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| ZkError::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| ZkError::Format(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}
