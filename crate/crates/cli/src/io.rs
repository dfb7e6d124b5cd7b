//! CSV readers and writers for the command line tool.
//!
//! Two formats are supported:
//!
//! * dense: an m-by-m numeric grid, one matrix row per CSV record, with an
//!   optional header row. `NA` (or an empty cell) is accepted only on the
//!   diagonal and only when the diagonal is declared missing.
//! * long: one record per entry with 1-based index columns `i,j,k` followed
//!   by a value column `y` (data stacks) or one column per covariate
//!   (regression designs). The grid must be complete; diagonal entries must
//!   be absent or `NA` when the diagonal is declared missing.

use std::fmt::Write as _;
use std::path::Path;

use matlrt::{DyadicDesign, RelationalMatrix};
use nalgebra::DMatrix;

use crate::CliError;

fn data_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {msg}", path.display()))
}

fn is_na(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

/// `Ok(None)` encodes an `NA` cell.
fn parse_cell(cell: &str) -> Result<Option<f64>, String> {
    if is_na(cell) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(v) => Err(format!("non-finite value {v}")),
        Err(_) => Err(format!("cannot parse {cell:?} as a number")),
    }
}

fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(path, e))?;
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| data_err(path, e))?;
        // Skip fully blank lines.
        if record.iter().all(str::is_empty) {
            continue;
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(data_err(path, "file contains no data"));
    }
    Ok(records)
}

/// Reads a dense matrix. A first row containing any cell that is neither a
/// number nor `NA` is treated as a header and skipped.
pub fn read_dense(path: &Path, missing_diagonal: bool) -> Result<DMatrix<f64>, CliError> {
    let mut records = read_records(path)?;
    let has_header = records[0].iter().any(|cell| parse_cell(cell).is_err());
    if has_header {
        records.remove(0);
    }
    let m = records.len();
    if m == 0 {
        return Err(data_err(path, "file contains a header but no data rows"));
    }
    let mut out = DMatrix::<f64>::zeros(m, m);
    for (i, record) in records.iter().enumerate() {
        if record.len() != m {
            return Err(data_err(
                path,
                format!(
                    "row {} has {} columns but the file has {m} data rows; the matrix must be square",
                    i + 1,
                    record.len()
                ),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let value = parse_cell(cell)
                .map_err(|msg| data_err(path, format!("row {}, column {}: {msg}", i + 1, j + 1)))?;
            out[(i, j)] = match value {
                Some(v) => v,
                None if i == j && missing_diagonal => 0.0,
                None if i == j => {
                    return Err(data_err(
                        path,
                        format!(
                            "NA on the diagonal at row {}; pass --missing-diagonal to treat the \
                             diagonal as undefined",
                            i + 1
                        ),
                    ))
                }
                None => {
                    return Err(data_err(
                        path,
                        format!("NA off the diagonal at row {}, column {}", i + 1, j + 1),
                    ))
                }
            };
        }
    }
    Ok(out)
}

/// Reads a dense matrix as relational data, honoring the diagonal flag.
pub fn read_relational(path: &Path, missing_diagonal: bool) -> Result<RelationalMatrix, CliError> {
    let entries = read_dense(path, missing_diagonal)?;
    let y = if missing_diagonal {
        RelationalMatrix::with_missing_diagonal(entries)
    } else {
        RelationalMatrix::new(entries)
    }?;
    Ok(y)
}

/// A parsed long-format file: indices are 0-based, `k` is the replicate.
struct LongFile {
    m: usize,
    p: usize,
    /// Per value column, per replicate: dense m-by-m grid of parsed cells.
    columns: Vec<Vec<DMatrix<Option<f64>>>>,
    names: Vec<String>,
}

fn read_long(path: &Path, index_cols: [&str; 3]) -> Result<LongFile, CliError> {
    let records = read_records(path)?;
    let header = &records[0];
    if header.len() < 4 {
        return Err(data_err(
            path,
            "long format needs a header row with columns i,j,k and at least one value column",
        ));
    }
    for (pos, want) in index_cols.iter().enumerate() {
        if !header[pos].eq_ignore_ascii_case(want) {
            return Err(data_err(
                path,
                format!(
                    "column {} must be named {want:?} (found {:?})",
                    pos + 1,
                    &header[pos]
                ),
            ));
        }
    }
    let names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();

    let mut rows = Vec::with_capacity(records.len() - 1);
    let mut m = 0usize;
    let mut p = 0usize;
    for (line, record) in records.iter().enumerate().skip(1) {
        if record.len() != header.len() {
            return Err(data_err(
                path,
                format!("record {} has {} fields, header has {}", line + 1, record.len(), header.len()),
            ));
        }
        let mut idx = [0usize; 3];
        for (pos, slot) in idx.iter_mut().enumerate() {
            *slot = record[pos].parse::<usize>().map_err(|_| {
                data_err(
                    path,
                    format!(
                        "record {}: {:?} is not a positive integer {} index",
                        line + 1,
                        &record[pos],
                        index_cols[pos]
                    ),
                )
            })?;
            if *slot == 0 {
                return Err(data_err(path, format!("record {}: indices are 1-based", line + 1)));
            }
        }
        let mut values = Vec::with_capacity(names.len());
        for (c, cell) in record.iter().enumerate().skip(3) {
            values.push(parse_cell(cell).map_err(|msg| {
                data_err(path, format!("record {}, column {:?}: {msg}", line + 1, &header[c]))
            })?);
        }
        m = m.max(idx[0]).max(idx[1]);
        p = p.max(idx[2]);
        rows.push((idx, values));
    }

    let mut columns =
        vec![vec![DMatrix::<Option<f64>>::from_element(m, m, None); p]; names.len()];
    let mut seen = vec![DMatrix::<bool>::from_element(m, m, false); p];
    for ([i, j, k], values) in rows {
        if std::mem::replace(&mut seen[k - 1][(i - 1, j - 1)], true) {
            return Err(data_err(path, format!("duplicate entry for (i={i}, j={j}, k={k})")));
        }
        for (c, v) in values.into_iter().enumerate() {
            columns[c][k - 1][(i - 1, j - 1)] = v;
        }
    }
    Ok(LongFile { m, p, columns, names })
}

/// Checks grid completeness and resolves each cell, mapping a missing or NA
/// diagonal to `None` when allowed and rejecting gaps everywhere else.
fn resolve_grid(
    path: &Path,
    grid: &DMatrix<Option<f64>>,
    k: usize,
    name: &str,
    missing_diagonal: bool,
) -> Result<DMatrix<f64>, CliError> {
    let m = grid.nrows();
    let mut out = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            match grid[(i, j)] {
                Some(v) if i == j && missing_diagonal => {
                    return Err(data_err(
                        path,
                        format!(
                            "{name}: diagonal entry (i={}, j={}, k={k}) has value {v} but the \
                             diagonal is declared missing; drop the row or write NA",
                            i + 1,
                            j + 1
                        ),
                    ))
                }
                Some(v) => out[(i, j)] = v,
                None if i == j && missing_diagonal => out[(i, j)] = 0.0,
                None => {
                    return Err(data_err(
                        path,
                        format!(
                            "{name}: missing entry (i={}, j={}, k={k}); the grid must be complete",
                            i + 1,
                            j + 1
                        ),
                    ))
                }
            }
        }
    }
    Ok(out)
}

/// Reads a replicate stack from a long-format file with value column `y`.
pub fn read_long_stack(
    path: &Path,
    missing_diagonal: bool,
) -> Result<Vec<RelationalMatrix>, CliError> {
    let file = read_long(path, ["i", "j", "k"])?;
    if file.names.len() != 1 || !file.names[0].eq_ignore_ascii_case("y") {
        return Err(data_err(
            path,
            format!(
                "a data stack must have exactly one value column named \"y\" (found {:?})",
                file.names
            ),
        ));
    }
    let mut ys = Vec::with_capacity(file.p);
    for k in 0..file.p {
        let grid = resolve_grid(path, &file.columns[0][k], k + 1, "y", missing_diagonal)?;
        let y = if missing_diagonal {
            RelationalMatrix::with_missing_diagonal(grid)
        } else {
            RelationalMatrix::new(grid)
        }?;
        ys.push(y);
    }
    Ok(ys)
}

/// Reads covariates into a regression design (an intercept is always added
/// first). Returns the design and the coefficient names.
pub fn read_design(
    path: &Path,
    m: usize,
    p: usize,
    missing_diagonal: bool,
) -> Result<(DyadicDesign, Vec<String>), CliError> {
    let file = read_long(path, ["i", "j", "k"])?;
    if file.m != m || file.p != p {
        return Err(data_err(
            path,
            format!(
                "covariates cover (m = {}, p = {}) but the data is (m = {m}, p = {p})",
                file.m, file.p
            ),
        ));
    }
    let mut design = DyadicDesign::new(m, p, !missing_diagonal)?;
    design.add_intercept()?;
    let mut names = vec!["intercept".to_string()];
    for (c, name) in file.names.iter().enumerate() {
        let mut flat = vec![0.0; m * m * p];
        for k in 0..p {
            let grid = resolve_grid(path, &file.columns[c][k], k + 1, name, missing_diagonal)?;
            for j in 0..m {
                for i in 0..m {
                    flat[k * m * m + j * m + i] = grid[(i, j)];
                }
            }
        }
        design.add_dyadic_feature(&flat)?;
        names.push(name.clone());
    }
    Ok((design, names))
}

/// Writes a replicate stack in long format, omitting undefined diagonals.
pub fn write_long_stack(path: &Path, ys: &[RelationalMatrix]) -> Result<(), CliError> {
    let mut out = String::from("i,j,k,y\n");
    for (k, y) in ys.iter().enumerate() {
        let m = y.m();
        for i in 0..m {
            for j in 0..m {
                if i == j && !y.diagonal_defined() {
                    continue;
                }
                let _ = writeln!(out, "{},{},{},{:.16e}", i + 1, j + 1, k + 1, y.entries()[(i, j)]);
            }
        }
    }
    std::fs::write(path, out).map_err(|e| data_err(path, e))
}
