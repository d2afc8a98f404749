use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, Result};

/// Covariates and response read from a CSV file.
#[derive(Debug, Clone)]
pub struct CsvData {
    /// Covariate column names, in header order.
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// Reads a headed CSV file. The column called `response` is the response;
/// every other column is a covariate.
pub fn load_csv(path: &Path, response: &str) -> Result<CsvData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let resp_col = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| CliError::MissingResponse { path: path.into(), name: response.into() })?;
    let names: Vec<String> =
        header.iter().enumerate().filter(|&(c, _)| c != resp_col).map(|(_, h)| h.to_string()).collect();

    let mut rows: Vec<f64> = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        for (c, field) in record.iter().enumerate() {
            let v = match field.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    return Err(CliError::NonNumericCell {
                        path: path.into(),
                        line,
                        column: c + 1,
                        name: header.get(c).unwrap_or("").to_string(),
                        value: field.to_string(),
                    })
                }
            };
            if c == resp_col {
                y.push(v);
            } else {
                rows.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(CliError::EmptyData { path: path.into() });
    }
    let x = DMatrix::from_row_slice(y.len(), names.len(), &rows);
    Ok(CsvData { names, x, y: DVector::from_vec(y) })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io { path: path.into(), source },
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => {
            let (line, byte) = pos.map_or((0, 0), |p| (p.line(), p.byte()));
            CliError::Parse {
                path: path.into(),
                line,
                column: Some(expected_len.min(len) as usize + 1),
                byte,
                message: format!("expected {expected_len} fields, found {len}"),
            }
        }
        csv::ErrorKind::Utf8 { pos, err } => {
            let (line, byte) = pos.map_or((0, 0), |p| (p.line(), p.byte()));
            CliError::Parse {
                path: path.into(),
                line,
                column: Some(err.field() + 1),
                byte,
                message: "invalid UTF-8".into(),
            }
        }
        _ => CliError::Parse { path: path.into(), line: 0, column: None, byte: 0, message },
    }
}
