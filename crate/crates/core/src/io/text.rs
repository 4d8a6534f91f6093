//! `n d p` header line, then `n` lines of `d` whitespace-separated floats.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{LpError, Result};
use crate::geometry::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub dataset: Dataset,
    /// Declared norm exponent; informational for query files.
    pub p: f64,
}

/// Serialize with shortest round-trip float formatting.
pub fn write_dataset(dataset: &Dataset, p: f64) -> String {
    let mut out = String::new();
    writeln!(out, "{} {} {}", dataset.len(), dataset.dim(), p).unwrap();
    for v in dataset.iter() {
        for (i, x) in v.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> LpError {
    LpError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_dataset(text: &str) -> Result<DatasetFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file, expected \"n d p\""))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(parse_err(1, format!("expected \"n d p\", got {header:?}")));
    }
    let n: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(1, format!("invalid point count {:?}", fields[0])))?;
    let d: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(1, format!("invalid dimension {:?}", fields[1])))?;
    let p: f64 = fields[2]
        .parse()
        .map_err(|_| parse_err(1, format!("invalid norm exponent {:?}", fields[2])))?;
    if d == 0 {
        return Err(parse_err(1, "dimension must be at least 1"));
    }
    if !(p.is_finite() && p >= 1.0) {
        return Err(parse_err(1, format!("norm exponent must be finite and >= 1, got {p}")));
    }

    let mut coords = Vec::with_capacity(n.saturating_mul(d).min(1 << 24));
    let mut rows = 0;
    let mut last = 1;
    for (lineno, line) in lines {
        last = lineno;
        if line.trim().is_empty() {
            continue;
        }
        if rows == n {
            return Err(parse_err(lineno, format!("more than the declared {n} points")));
        }
        let before = coords.len();
        for tok in line.split_whitespace() {
            let x: f64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid number {tok:?}")))?;
            if !x.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value {tok:?}")));
            }
            coords.push(x);
        }
        let got = coords.len() - before;
        if got != d {
            return Err(parse_err(lineno, format!("expected {d} values, found {got}")));
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(last, format!("declared {n} points, found {rows}")));
    }
    Ok(DatasetFile {
        dataset: Dataset::new(d, coords)?,
        p,
    })
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let text = std::fs::read_to_string(path).map_err(|e| LpError::io(path, e))?;
    parse_dataset(&text)
}
