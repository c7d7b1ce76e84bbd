//! Text format for realized covariance series.
//!
//! ```text
//! #rcov v1 n=2 T=3
//! 1,0.1,2
//! 1.5,0.2,2.5
//! 0.9,-0.05,1.1
//! ```
//!
//! Each record is `vech(Y_t)` (lower triangle, column by column). Values are
//! written in shortest round-trip form, so a write/read cycle is exact.
//! Readers accept commas, semicolons, tabs or spaces as separators.

use std::fmt::Write as _;
use std::path::Path;

use cbf::{Mat, MatrixSeries, SpdMatrix};

use crate::error::{CliError, CliResult};

pub const VERSION: &str = "v1";

/// Formats a series as an RcovFile.
pub fn to_string(series: &MatrixSeries) -> String {
    let n = series.n();
    let mut out = format!("#rcov {VERSION} n={n} T={}\n", series.len());
    for y in series.iter() {
        let v = y.vech();
        for (i, x) in v.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, series: &MatrixSeries) -> CliResult<()> {
    std::fs::write(path, to_string(series)).map_err(|e| CliError::io(path, e))
}

fn header_field(token: &str, key: &str) -> CliResult<usize> {
    token
        .strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::invalid(format!("malformed header field {token:?}, expected {key}=<integer>")))
}

/// Parses an RcovFile. With `ridge = Some(eps)` every matrix is replaced by
/// `Y + eps I` before the positive-definiteness check.
pub fn parse(text: &str, ridge: Option<f64>) -> CliResult<MatrixSeries> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| CliError::invalid("empty rcov file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "#rcov" {
        return Err(CliError::invalid(format!("bad header {header:?}, expected `#rcov v1 n=<n> T=<T>`")));
    }
    if tokens[1] != VERSION {
        return Err(CliError::invalid(format!("unsupported rcov version {}", tokens[1])));
    }
    let n = header_field(tokens[2], "n")?;
    let t = header_field(tokens[3], "T")?;
    if n == 0 || t == 0 {
        return Err(CliError::invalid("header declares an empty series"));
    }
    if let Some(eps) = ridge {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(CliError::invalid(format!("ridge must be a finite nonnegative number, got {eps}")));
        }
    }
    let len = n * (n + 1) / 2;
    let mut data = Vec::with_capacity(t);
    for (lineno, line) in lines {
        let values = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::invalid(format!("line {}: {e}", lineno + 1)))?;
        if values.len() != len {
            return Err(CliError::invalid(format!(
                "line {}: record has {} values, expected {len}",
                lineno + 1,
                values.len()
            )));
        }
        let mut m = cbf::matalg::unvech(&values, n).map_err(|e| CliError::invalid(e.to_string()))?;
        if let Some(eps) = ridge {
            m += Mat::identity(n, n) * eps;
        }
        let y =
            SpdMatrix::new(m).map_err(|e| CliError::invalid(format!("line {}: {e} (consider --ridge)", lineno + 1)))?;
        data.push(y);
    }
    if data.len() != t {
        return Err(CliError::invalid(format!("header declares T={t} but the file holds {} records", data.len())));
    }
    MatrixSeries::new(data).map_err(CliError::from)
}

pub fn read(path: &Path, ridge: Option<f64>) -> CliResult<MatrixSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, ridge)
}
