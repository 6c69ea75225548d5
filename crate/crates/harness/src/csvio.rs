//! Deterministic CSV emission.
//!
//! Every file starts with a schema comment line so downstream readers can
//! pin the column layout. Floats print in Rust's shortest round-trip form,
//! which keeps re-runs byte-identical. Files are written whole through a
//! temporary sibling and renamed into place, so failed runs leave no
//! partial outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const CSV_SCHEMA_VERSION: &str = "rfe-csv-v1";

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Int(i64),
    UInt(u64),
    Float(f64),
    Bool(bool),
    Str(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Cell::UInt(v) => {
                let _ = write!(out, "{v}");
            }
            Cell::Float(v) => {
                let _ = write!(out, "{v}");
            }
            Cell::Bool(v) => {
                let _ = write!(out, "{v}");
            }
            Cell::Str(v) => {
                debug_assert!(!v.contains(',') && !v.contains('\n'));
                let _ = write!(out, "{v}");
            }
        }
    }
}

/// In-memory CSV document rendered and persisted atomically at the end.
#[derive(Debug, Clone)]
pub struct CsvDoc {
    header: Vec<String>,
    comments: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl CsvDoc {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            header: columns.iter().map(|c| c.to_string()).collect(),
            comments: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Extra `# key=value` comment lines placed after the schema line.
    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# schema: {CSV_SCHEMA_VERSION}");
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let mut line = String::new();
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                cell.render(&mut line);
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

/// Write-whole-then-rename; the temporary lives next to the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp: PathBuf = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
