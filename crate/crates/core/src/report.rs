//! Plot-ready CSV emission.
//!
//! One layout everywhere: a header row of column names, data rows in full
//! double precision (17 significant digits), LF line endings, and optional
//! `#`-prefixed footer lines carrying fit metadata.  Identical inputs
//! produce byte-identical files.

use std::io::Write;
use std::path::Path;

/// Format a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Default)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Lines appended after the data, each emitted as `# <line>`.
    pub footers: Vec<String>,
    /// Lines prepended before the header, each emitted as `# <line>`.
    pub preamble: Vec<String>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in &self.preamble {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        for line in &self.footers {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())
    }
}
