//! Flat CSV tables: `x[,y],value` per node in row-major order, and the
//! per-level history.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use csv::{ReaderBuilder, Terminator, Writer, WriterBuilder};
use linfel_core::{Grid, LevelRecord, ScalarField};

use crate::error::CliError;

pub const HISTORY_HEADER: [&str; 5] = ["p", "e_p", "a_p", "grad_norm", "iters"];

/// Coordinates and values of a nodal table.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalTable {
    pub dim: usize,
    pub coords: Vec<[f64; 2]>,
    pub values: Vec<f64>,
}

fn writer(path: &Path) -> Result<Writer<File>, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(file))
}

fn csv_io(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Table {
            path: path.into(),
            message: format!("{other:?}"),
        },
    }
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<(), CliError> {
    let grid = field.grid();
    let mut w = writer(path)?;
    let err = |e| csv_io(path, e);
    if grid.dim() == 1 {
        w.write_record(["x", "value"]).map_err(err)?;
        for (k, v) in field.values().iter().enumerate() {
            w.serialize((grid.coords(k)[0], v)).map_err(err)?;
        }
    } else {
        w.write_record(["x", "y", "value"]).map_err(err)?;
        for (k, v) in field.values().iter().enumerate() {
            let x = grid.coords(k);
            w.serialize((x[0], x[1], v)).map_err(err)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_history(path: &Path, history: &[LevelRecord]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let err = |e| csv_io(path, e);
    w.write_record(HISTORY_HEADER).map_err(err)?;
    for r in history {
        w.serialize((r.p, r.e_p, r.a_p, r.grad_norm, r.iterations)).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_table(path: &Path) -> Result<NodalTable, CliError> {
    let bad = |message: String| CliError::Table {
        path: path.into(),
        message,
    };
    let mut r = ReaderBuilder::new().from_path(path).map_err(|e| csv_io(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| csv_io(path, e))?.iter().map(str::to_string).collect();
    let dim = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "value"] => 1,
        ["x", "y", "value"] => 2,
        _ => return Err(bad(format!("expected header x,value or x,y,value, found {}", header.join(",")))),
    };
    let mut table = NodalTable {
        dim,
        coords: Vec::new(),
        values: Vec::new(),
    };
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_io(path, e))?;
        let nums: Vec<f64> = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", row + 2)))?;
        if nums.len() != dim + 1 {
            return Err(bad(format!("row {}: expected {} columns", row + 2, dim + 1)));
        }
        table.coords.push(if dim == 1 { [nums[0], 0.0] } else { [nums[0], nums[1]] });
        table.values.push(nums[dim]);
    }
    Ok(table)
}

/// Largest coordinate mismatch against the nodes of `grid`, or `None` when
/// the node counts or dimensions differ.
pub fn coordinate_mismatch(table: &NodalTable, grid: &Grid) -> Option<f64> {
    if table.dim != grid.dim() || table.values.len() != grid.node_count() {
        return None;
    }
    Some(
        table
            .coords
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let x = grid.coords(k);
                (c[0] - x[0]).abs().max((c[1] - x[1]).abs())
            })
            .fold(0.0, f64::max),
    )
}

/// Loads a nodal table onto `grid`, rejecting tables whose nodes differ.
pub fn read_field(path: &Path, grid: &Arc<Grid>) -> Result<ScalarField, CliError> {
    let table = read_table(path)?;
    let tol = 1e-9 * grid.extent().iter().cloned().fold(1.0, f64::max);
    match coordinate_mismatch(&table, grid) {
        Some(d) if d <= tol => {}
        Some(d) => {
            return Err(CliError::Table {
                path: path.into(),
                message: format!("node coordinates differ from the grid by {d:e}"),
            })
        }
        None => {
            return Err(CliError::Table {
                path: path.into(),
                message: format!(
                    "{} rows in {} dimension(s) do not match the {}-node grid in {} dimension(s)",
                    table.values.len(),
                    table.dim,
                    grid.node_count(),
                    grid.dim()
                ),
            })
        }
    }
    Ok(ScalarField::new(grid.clone(), table.values)?)
}
