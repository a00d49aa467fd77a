//! Plain-text distance matrices: one row per line, entries separated by
//! commas and/or whitespace. Blank lines and lines starting with `#` are
//! ignored.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metric::{validate, MetricSpace};
use crate::polytope::MappingPair;

/// Parses a square or rectangular matrix. Errors carry 1-based line numbers.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for token in trimmed.split(|c: char| c == ',' || c.is_whitespace()) {
            if token.is_empty() {
                continue;
            }
            let value: f64 = token.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("cannot parse {token:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite entry {token:?}"),
                });
            }
            row.push(value);
        }
        if row.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "row has no entries".into(),
            });
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("row has {} entries, expected {w}", row.len()),
                });
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    let Some(cols) = width else {
        return Err(Error::Parse {
            line: 0,
            message: "no matrix rows found".into(),
        });
    };
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Parses and validates a metric space.
pub fn parse_space(text: &str, strict: bool) -> Result<MetricSpace> {
    validate(parse_matrix(text)?, strict)
}

pub fn read_space(path: &Path, strict: bool) -> Result<MetricSpace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_space(&text, strict)
}

/// Comma-separated rows using the shortest representation that parses
/// back to the same `f64`.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", m[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses `{"f": [...], "g": [...]}` and checks index ranges.
pub fn parse_mapping_pair(text: &str) -> Result<MappingPair> {
    let raw: MappingPair = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    MappingPair::new(raw.f, raw.g)
}
