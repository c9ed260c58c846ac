//! Trace CSV files: comma separated, LF line endings, no quoting, numbers
//! rounded to 9 significant digits.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::Trace;

/// Decimal text of `x` rounded to 9 significant digits, trailing zeros
/// removed.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (_, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-7..=15).contains(&exp) {
        return sci;
    }
    let rounded: f64 = sci.parse().expect("round trip of formatted float");
    let decimals = (8 - exp).max(0) as usize;
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    s
}

/// Render `trace` as CSV text.
pub fn trace_to_csv(trace: &Trace) -> String {
    let mut out = trace.columns().join(",");
    out.push('\n');
    for row in &trace.rows {
        let fields: Vec<String> = Trace::row_values(row).into_iter().map(format_number).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    fs::write(path, trace_to_csv(trace)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse CSV text produced by [`trace_to_csv`].
pub fn parse_trace_csv(text: &str, path: &Path) -> Result<Trace> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
    let names: Vec<&str> = header.split(',').collect();
    let m = names.iter().filter(|n| n.starts_with("p_vsi")).count();
    let trace = Trace {
        vsi_count: m,
        rows: Vec::new(),
    };
    if names != trace.columns() {
        return Err(parse_err(1, format!("unexpected header `{header}`")));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let values = line
            .split(',')
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(n + 2, format!("`{f}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let row = Trace::row_from_values(m, &values)
            .ok_or_else(|| parse_err(n + 2, format!("expected {} fields, got {}", names.len(), values.len())))?;
        rows.push(row);
    }
    Ok(Trace { rows, ..trace })
}

pub fn read_trace_csv(path: &Path) -> Result<Trace> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace_csv(&text, path)
}
