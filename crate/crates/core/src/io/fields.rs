//! Nodal field CSVs: one row per mesh node in node order,
//! `node_id,value[,value_y[,value_z]]`, optional header line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

fn format_err(path: &Path, line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: format!("line {line}: {msg}"),
    }
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(file))
}

/// Numeric rows of a CSV, skipping a leading non-numeric header.
fn numeric_rows(path: &Path) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (i, rec) in open(path)?.records().enumerate() {
        let rec = rec.map_err(|e| format_err(path, e.position().map_or(0, |p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push((line, v)),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(format_err(path, line, e)),
        }
    }
    Ok(rows)
}

/// Reads `width` value columns per node. Node ids must run 0, 1, 2, ...
pub fn read_nodal_csv(path: &Path, num_nodes: usize, width: usize) -> Result<Vec<Vec<f64>>> {
    let rows = numeric_rows(path)?;
    if rows.len() != num_nodes {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("{} rows for a mesh with {num_nodes} nodes", rows.len()),
        });
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, (line, v))| {
            if v.len() != width + 1 {
                return Err(format_err(path, line, format!("expected {} columns, found {}", width + 1, v.len())));
            }
            if v[0] != i as f64 {
                return Err(format_err(path, line, format!("node id {} out of order, expected {i}", v[0])));
            }
            Ok(v[1..].to_vec())
        })
        .collect()
}

pub fn read_scalar_field(path: &Path, num_nodes: usize) -> Result<Vec<f64>> {
    Ok(read_nodal_csv(path, num_nodes, 1)?.into_iter().map(|v| v[0]).collect())
}

/// Velocity with `dim` components, zero padded to three.
pub fn read_vector_field(path: &Path, num_nodes: usize, dim: usize) -> Result<Vec<[f64; 3]>> {
    Ok(read_nodal_csv(path, num_nodes, dim)?
        .into_iter()
        .map(|v| {
            let mut out = [0.0; 3];
            out[..dim].copy_from_slice(&v);
            out
        })
        .collect())
}

/// Two-column `(x, y)` table, e.g. strain against pore area.
pub fn read_table_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    numeric_rows(path)?
        .into_iter()
        .map(|(line, v)| match v[..] {
            [x, y] => Ok((x, y)),
            _ => Err(format_err(path, line, "expected two columns")),
        })
        .collect()
}

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut s = format!("{header}\n");
    for (i, row) in rows.enumerate() {
        let _ = write!(s, "{i}");
        for v in row {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn write_scalar_field(path: &Path, values: &[f64]) -> Result<()> {
    write_rows(path, "node_id,value", values.iter().map(|&v| vec![v]))
}

pub fn write_vector_field(path: &Path, values: &[[f64; 3]], dim: usize) -> Result<()> {
    let header = if dim == 2 { "node_id,value,value_y" } else { "node_id,value,value_y,value_z" };
    write_rows(path, header, values.iter().map(|v| v[..dim].to_vec()))
}
