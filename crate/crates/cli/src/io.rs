//! CSV input and number formatting.

use std::fs;
use std::io::Write;
use std::path::Path;

use covchol::linalg::{Matrix, SymMatrix};

use crate::CliError;

pub struct Table {
    pub names: Vec<String>,
    pub values: Matrix,
}

/// Reads a numeric CSV; with `header`, the first record names the columns.
pub fn read_matrix_csv(path: &Path, header: bool) -> Result<Table, CliError> {
    let input_err = |message: String| CliError::Input {
        path: path.display().to_string(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| input_err(e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut names: Vec<String> = if header {
        reader
            .headers()
            .map_err(|e| input_err(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect()
    } else {
        Vec::new()
    };
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| input_err(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(input_err(format!("line {line}: expected {c} fields, found {}", rec.len())))
            }
            _ => {}
        }
        for f in rec.iter() {
            let v: f64 = f
                .parse()
                .map_err(|_| input_err(format!("line {line}: not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(input_err(format!("line {line}: non-finite value {f:?}")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| input_err("no data rows".into()))?;
    if names.is_empty() {
        names = (1..=cols).map(|j| format!("x{j}")).collect();
    } else if names.len() != cols {
        return Err(input_err(format!("header has {} names for {cols} columns", names.len())));
    }
    let values = Matrix::from_row_major(rows, cols, values).map_err(|e| input_err(e.to_string()))?;
    Ok(Table { names, values })
}

pub fn fmt_num(v: f64, digits: Option<usize>) -> String {
    match digits {
        Some(d) => format!("{v:.d$}"),
        None => format!("{v}"),
    }
}

pub fn matrix_csv(names: &[String], m: &SymMatrix, digits: Option<usize>) -> String {
    let mut out = names.join(",");
    out.push('\n');
    for i in 0..m.dim() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt_num(v, digits)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Input {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Input {
                    path: "<stdout>".into(),
                    message: e.to_string(),
                })
        }
    }
}
