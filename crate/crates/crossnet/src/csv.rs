//! Minimal CSV emission with numbers at nine significant digits.

use std::fs;
use std::path::Path;

use crate::error::{AppError, Result};

/// Formats `x` with nine significant digits: positional notation for
/// magnitudes in `[1e-4, 1e9)`, scientific otherwise.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // take the exponent after rounding, which may carry into the next decade
    let sci = format!("{x:.8e}");
    let (_, e) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = e.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        format!("{:.*}", (8 - exp) as usize, x)
    } else {
        sci
    }
}

/// Header plus rows; cells are written verbatim.
#[derive(Clone, Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| AppError::io(path, e))
    }
}
