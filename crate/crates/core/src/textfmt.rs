//! Shared reader/writer for the `<magic> v1 <rows> <dim>` text layout used by
//! embedding tables and feature datasets.

use std::fmt::Write as _;

use crate::error::{bail, Result};

pub(crate) fn write_rows<'a, I>(magic: &str, dim: usize, rows: I) -> String
where
    I: ExactSizeIterator<Item = (&'a str, &'a [f64])>,
{
    let mut out = String::new();
    let _ = writeln!(out, "{magic} v1 {} {dim}", rows.len());
    for (label, values) in rows {
        out.push_str(label);
        out.push('\t');
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            // 17 significant digits round-trip every f64
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub(crate) fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains(['\t', '\n', '\r']) {
        bail!(Format, "label {label:?} is empty or contains tab/newline");
    }
    Ok(())
}

pub(crate) fn read_rows(text: &str, magic: &str) -> Result<(usize, Vec<(String, Vec<f64>)>)> {
    let mut lines = text.split('\n');
    let header = lines.next().unwrap_or_default();
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 4 || fields[0] != magic || fields[1] != "v1" {
        bail!(Format, "expected header `{magic} v1 <rows> <dim>`, found {header:?}");
    }
    let count: usize = fields[2]
        .parse()
        .map_err(|_| crate::FscilError::Format(format!("bad row count {:?}", fields[2])))?;
    let dim: usize = fields[3]
        .parse()
        .map_err(|_| crate::FscilError::Format(format!("bad dim {:?}", fields[3])))?;
    if dim == 0 {
        bail!(Format, "dim must be positive");
    }
    let mut rows = Vec::with_capacity(count);
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let Some((label, rest)) = line.split_once('\t') else {
            bail!(Format, "line {}: missing tab after label", lineno + 2);
        };
        check_label(label)?;
        let values: Vec<f64> = rest
            .split(' ')
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| crate::FscilError::Format(format!("line {}: bad number {tok:?}", lineno + 2)))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            bail!(Format, "line {}: {} values under a dim-{dim} header", lineno + 2, values.len());
        }
        if values.iter().any(|v| !v.is_finite()) {
            bail!(Format, "line {}: non-finite value", lineno + 2);
        }
        rows.push((label.to_string(), values));
    }
    if rows.len() != count {
        bail!(Format, "header declares {count} rows, found {}", rows.len());
    }
    Ok((dim, rows))
}
