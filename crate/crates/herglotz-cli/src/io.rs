//! File plumbing: JSON and CSV writers, grid and field CSV readers.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use herglotz::synthesis::GridField;
use herglotz::C64;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// A writer on `path`, or stdout when there is none.
pub fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| CliError::io(p, e))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn label(path: Option<&Path>) -> PathBuf {
    path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf)
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    let mut w = sink(path)?;
    w.write_all(text.as_bytes())
        .and_then(|()| w.flush())
        .map_err(|e| CliError::io(label(path), e))
}

fn csv_error(path: Option<&Path>, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(label(path), io),
        other => CliError::Input {
            path: label(path),
            message: format!("{other:?}"),
        },
    }
}

pub fn write_csv<T: Serialize>(path: Option<&Path>, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(sink(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(label(path), e))
}

/// Shortest text that parses back to the same f64.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn input_error(path: &Path, line: u64, message: impl Into<String>) -> CliError {
    CliError::Input {
        path: path.to_path_buf(),
        message: format!("line {line}: {}", message.into()),
    }
}

fn parse_cell(path: &Path, line: u64, column: &str, cell: &str) -> CliResult<f64> {
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| input_error(path, line, format!("column {column}: '{cell}' is not a finite number")))
}

fn records(path: &Path) -> CliResult<(Vec<String>, Vec<(u64, csv::StringRecord)>)> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(Some(path), e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(Some(path), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok((headers, out))
}

fn column(path: &Path, headers: &[String], name: &str) -> CliResult<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| CliError::Input {
        path: path.to_path_buf(),
        message: format!("missing column '{name}' (have {})", headers.join(",")),
    })
}

/// Points from a CSV with columns x, y, z.
pub fn read_grid_csv(path: &Path) -> CliResult<Vec<[f64; 3]>> {
    let (headers, rows) = records(path)?;
    let idx = [column(path, &headers, "x")?, column(path, &headers, "y")?, column(path, &headers, "z")?];
    rows.iter()
        .map(|(line, rec)| {
            let mut p = [0.0; 3];
            for (k, (&i, name)) in idx.iter().zip(["x", "y", "z"]).enumerate() {
                let cell = rec.get(i).ok_or_else(|| input_error(path, *line, format!("missing {name}")))?;
                p[k] = parse_cell(path, *line, name, cell)?;
            }
            Ok(p)
        })
        .collect()
}

pub fn write_grid_csv(path: &Path, points: &[[f64; 3]]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(sink(Some(path))?);
    let err = |e| csv_error(Some(path), e);
    w.write_record(["x", "y", "z"]).map_err(err)?;
    for p in points {
        w.write_record(p.map(num)).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

const FIELD_COLUMNS: [&str; 9] = ["x", "y", "z", "ux_re", "ux_im", "uy_re", "uy_im", "uz_re", "uz_im"];

pub fn write_field_csv(path: Option<&Path>, field: &GridField, residual: Option<&[f64]>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(sink(path)?);
    let err = |e| csv_error(path, e);
    let mut header: Vec<&str> = FIELD_COLUMNS.to_vec();
    if residual.is_some() {
        header.push("residual");
    }
    w.write_record(&header).map_err(err)?;
    for (i, (p, u)) in field.points().iter().zip(field.values()).enumerate() {
        let mut rec: Vec<String> = p.iter().map(|v| num(*v)).collect();
        for z in u {
            rec.push(num(z.re));
            rec.push(num(z.im));
        }
        if let Some(r) = residual {
            rec.push(num(r[i]));
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(label(path), e))
}

/// Reads what `write_field_csv` wrote.
pub fn read_field_csv(path: &Path) -> CliResult<(GridField, Option<Vec<f64>>)> {
    let (headers, rows) = records(path)?;
    let idx: Vec<usize> = FIELD_COLUMNS
        .iter()
        .map(|c| column(path, &headers, c))
        .collect::<CliResult<_>>()?;
    let res_idx = headers.iter().position(|h| h == "residual");
    let mut points = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    let mut residual = res_idx.map(|_| Vec::with_capacity(rows.len()));
    for (line, rec) in &rows {
        let cell = |k: usize| -> CliResult<f64> {
            let name = FIELD_COLUMNS[k];
            let s = rec.get(idx[k]).ok_or_else(|| input_error(path, *line, format!("missing {name}")))?;
            parse_cell(path, *line, name, s)
        };
        points.push([cell(0)?, cell(1)?, cell(2)?]);
        values.push([
            C64::new(cell(3)?, cell(4)?),
            C64::new(cell(5)?, cell(6)?),
            C64::new(cell(7)?, cell(8)?),
        ]);
        if let (Some(i), Some(r)) = (res_idx, residual.as_mut()) {
            let s = rec.get(i).ok_or_else(|| input_error(path, *line, "missing residual"))?;
            r.push(parse_cell(path, *line, "residual", s)?);
        }
    }
    Ok((GridField::new(points, values)?, residual))
}
