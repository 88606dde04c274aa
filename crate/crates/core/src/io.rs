//! Data ingestion and result serialization.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::Family;
use crate::optimize::ProfilePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// One observation per line, with an optional leading `x` header.
///
/// Blank lines are skipped. Line numbers in errors are 1-based.
pub fn parse_data(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let first = !seen_content;
        seen_content = true;
        if first && line.trim_matches('"') == "x" {
            continue;
        }
        let cell = line.trim_end_matches(',').trim();
        if cell.contains(',') {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected a single column, got {line:?}"),
            });
        }
        let v: f64 = cell.parse().map_err(|_| Error::Parse {
            line: i + 1,
            message: format!("not a number: {cell:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("non-finite value {cell:?}"),
            });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(out)
}

pub fn read_data(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_data(&text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn write_text(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_error(p, e)),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
                .or_else(|e| match e.kind() {
                    std::io::ErrorKind::BrokenPipe => Ok(()),
                    _ => Err(io_error(Path::new("<stdout>"), e)),
                })
        }
    }
}

/// Serializes `value` as JSON, or uses `csv` for the CSV format.
pub fn write_results<T: Serialize>(
    value: &T,
    csv: Option<&dyn Fn() -> String>,
    format: Format,
    path: Option<&Path>,
) -> Result<()> {
    let text = match (format, csv) {
        (Format::Json, _) => to_json(value)?,
        (Format::Csv, Some(f)) => f(),
        (Format::Csv, None) => return Err(Error::Unsupported("this result has no CSV form".into())),
    };
    write_text(&text, path)
}

/// Header is the parameter names followed by `objective`.
pub fn profile_csv(family: &Family, points: &[ProfilePoint]) -> String {
    let mut s = family.param_names().join(",");
    s.push_str(",objective\n");
    for p in points {
        for v in p.theta.as_slice() {
            s.push_str(&fmt_num(*v));
            s.push(',');
        }
        s.push_str(&fmt_num(p.objective));
        s.push('\n');
    }
    s
}
