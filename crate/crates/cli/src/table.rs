//! Result tables with stable columns and byte-stable formatting: floats are
//! printed with 12 significant digits so reruns diff cleanly.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Table {
    pub command: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// 12 significant digits, scientific.
pub fn f12(x: f64) -> String {
    format!("{x:.11e}")
}

impl Table {
    pub fn new(command: &str, columns: &[&str]) -> Table {
        Table {
            command: command.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// Overall pass verdict: true unless some row's `pass` column is false.
    pub fn all_pass(&self) -> bool {
        match self.columns.iter().position(|c| c == "pass") {
            None => true,
            Some(i) => self.rows.iter().all(|r| r[i] == "true"),
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = String::new();
                let _ = writeln!(out, "{}", self.columns.join(","));
                for row in &self.rows {
                    let _ = writeln!(out, "{}", row.join(","));
                }
                out
            }
            Format::Json => {
                let mut payload = serde_json::to_string_pretty(self).expect("table serializes");
                payload.push('\n');
                payload
            }
        }
    }

    /// Parse back a rendered table (both formats) for aggregation.
    pub fn parse(content: &str) -> Option<Table> {
        if content.trim_start().starts_with('{') {
            return serde_json::from_str(content).ok();
        }
        let mut lines = content.lines();
        let header = lines.next()?;
        let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
            if row.len() != columns.len() {
                return None;
            }
            rows.push(row);
        }
        Some(Table {
            command: String::new(),
            columns,
            rows,
        })
    }
}
