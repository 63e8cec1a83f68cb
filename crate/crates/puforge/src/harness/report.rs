//! Result tables: aggregation across runs and emission as markdown, CSV,
//! and JSON. Emission is deterministic byte for byte given the same cells.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Accuracy statistics for one table cell, aggregated over repeated runs.
/// The per-run values and their seeds are kept so every mean is
/// recomputable from the table alone; `std` is the sample standard
/// deviation (zero for a single run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// Run seeds, ascending.
    pub seeds: Vec<u64>,
    /// Per-run accuracy, matching `seeds`.
    pub values: Vec<f64>,
}

impl CellStats {
    /// Aggregates `(seed, accuracy)` pairs; the cell is stored sorted by
    /// seed so aggregation order never leaks into the output.
    pub fn from_runs(pairs: &[(u64, f64)]) -> Result<CellStats> {
        if pairs.is_empty() {
            return Err(Error::data("cannot aggregate an empty cell"));
        }
        let mut pairs = pairs.to_vec();
        pairs.sort_by_key(|&(seed, _)| seed);
        let (seeds, values): (Vec<u64>, Vec<f64>) = pairs.into_iter().unzip();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            var.sqrt()
        };
        Ok(CellStats {
            mean,
            std,
            n: values.len(),
            seeds,
            values,
        })
    }
}

/// A rows-by-columns grid of aggregated results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub title: String,
    /// Header of the row-name column, e.g. "r" or "alpha".
    pub row_label: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `cells[i][j]` belongs to `rows[i]` x `cols[j]`.
    pub cells: Vec<Vec<CellStats>>,
}

impl ReportTable {
    pub fn new(
        title: impl Into<String>,
        row_label: impl Into<String>,
        rows: Vec<String>,
        cols: Vec<String>,
        cells: Vec<Vec<CellStats>>,
    ) -> Result<ReportTable> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::data("report table has no cells"));
        }
        if cells.len() != rows.len() || cells.iter().any(|r| r.len() != cols.len()) {
            return Err(Error::shape(
                "report cells",
                rows.len() * cols.len(),
                cells.iter().map(|r| r.len()).sum::<usize>(),
            ));
        }
        Ok(ReportTable {
            title: title.into(),
            row_label: row_label.into(),
            rows,
            cols,
            cells,
        })
    }

    /// Markdown: a `##` title line, then a pipe table with one row-name
    /// column and `mean ± std` cells at two decimals.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "## {}", self.title);
        out.push('\n');
        let _ = write!(out, "| {} |", self.row_label);
        for c in &self.cols {
            let _ = write!(out, " {c} |");
        }
        out.push('\n');
        let _ = write!(out, "|---|");
        for _ in &self.cols {
            let _ = write!(out, "---|");
        }
        out.push('\n');
        for (name, row) in self.rows.iter().zip(&self.cells) {
            let _ = write!(out, "| {name} |");
            for cell in row {
                let _ = write!(out, " {:.2} ± {:.2} |", cell.mean, cell.std);
            }
            out.push('\n');
        }
        out
    }

    /// CSV in long form at full float precision, one line per cell:
    /// `table,row,col,mean,std,n`.
    pub fn to_csv_rows(&self) -> String {
        let mut out = String::new();
        for (name, row) in self.rows.iter().zip(&self.cells) {
            for (col, cell) in self.cols.iter().zip(row) {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.16e},{:.16e},{}",
                    self.title, name, col, cell.mean, cell.std, cell.n
                );
            }
        }
        out
    }
}

/// Which report files to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Md];

    pub fn from_name(name: &str) -> Option<ReportFormat> {
        match name {
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            "md" => Some(ReportFormat::Md),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Md => "md",
        }
    }
}

/// A full report: every table one experiment command produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tables: Vec<ReportTable>,
}

impl Report {
    pub fn to_markdown(&self) -> String {
        self.tables
            .iter()
            .map(|t| t.to_markdown())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("table,row,col,mean,std,n\n");
        for t in &self.tables {
            out.push_str(&t.to_csv_rows());
        }
        out
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.tables.is_empty() || self.tables.iter().any(|t| t.rows.is_empty()) {
            return Err(Error::data("refusing to emit an empty report"));
        }
        Ok(())
    }

    /// Writes `<basename>.<ext>` into `dir` for one format.
    pub fn emit_format(&self, dir: &Path, basename: &str, format: ReportFormat) -> Result<()> {
        self.check_nonempty()?;
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{basename}.{}", format.extension()));
        let content = match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Md => self.to_markdown(),
            ReportFormat::Json => serde_json::to_string_pretty(self)? + "\n",
        };
        fs::write(path, content)?;
        Ok(())
    }

    /// Writes `<basename>.{csv,json,md}` into `dir`. Reruns with identical
    /// cells produce byte-identical files.
    pub fn emit_as(&self, dir: &Path, basename: &str) -> Result<()> {
        for format in ReportFormat::ALL {
            self.emit_format(dir, basename, format)?;
        }
        Ok(())
    }

    /// Writes the default `report.{csv,json,md}` file set.
    pub fn emit(&self, dir: &Path) -> Result<()> {
        self.emit_as(dir, "report")
    }
}
