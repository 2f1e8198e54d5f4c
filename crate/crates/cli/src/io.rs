// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV ingestion and float formatting.

use std::path::Path;

use irregcp::Series;

use crate::error::{CliError, Result};

/// Reads `value_column` (and `label_column` when present) from a CSV file
/// with a header row.
pub fn read_series(path: &Path, value_column: &str, label_column: &str) -> Result<Series> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let value_idx = headers
        .iter()
        .position(|h| h == value_column)
        .ok_or_else(|| {
            CliError::Input(format!(
                "{}: no column named `{value_column}` (found: {})",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
    let label_idx = headers.iter().position(|h| h == label_column);

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let raw = record.get(value_idx).unwrap_or("");
        let value: f64 = raw.parse().map_err(|_| {
            CliError::Input(format!(
                "{}: row {}: `{raw}` is not a number",
                path.display(),
                row + 2
            ))
        })?;
        values.push(value);
        if let Some(i) = label_idx {
            labels.push(record.get(i).unwrap_or("").to_string());
        }
    }
    if values.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    let series = if label_idx.is_some() {
        Series::with_labels(values, labels)?
    } else {
        Series::new(values)?
    };
    Ok(series)
}

/// Machine format: 17 significant digits.
pub fn fmt_machine(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// Human format: 4 significant digits.
pub fn fmt_human(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..6).contains(&magnitude) {
        let decimals = (3 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.3e}")
    }
}
