//! Plain-text numeric matrix loader.
//!
//! One row per line, whitespace- or comma-separated, `#` lines ignored,
//! last column is the label/target. Lets externally supplied datasets (e.g.
//! UCI files) feed the regression models without a download step.

use std::io::{Error, ErrorKind, Result};
use std::path::Path;

/// Parses a matrix file into (features row-major, last column, n_cols − 1).
pub fn load_numeric_matrix(path: &Path) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let text = std::fs::read_to_string(path)?;
    let mut features = Vec::new();
    let mut last = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() < 2 {
            return Err(Error::new(
                ErrorKind::InvalidData,
                format!("line {}: need at least two columns", lineno + 1),
            ));
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::new(
                    ErrorKind::InvalidData,
                    format!(
                        "line {}: expected {} columns, found {}",
                        lineno + 1,
                        w,
                        fields.len()
                    ),
                ));
            }
            _ => {}
        }
        for (col, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                Error::new(
                    ErrorKind::InvalidData,
                    format!("line {}: cannot parse '{}' as a number", lineno + 1, f),
                )
            })?;
            if col + 1 == fields.len() {
                last.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let width = width.ok_or_else(|| Error::new(ErrorKind::InvalidData, "file has no data rows"))?;
    Ok((features, last, width - 1))
}
