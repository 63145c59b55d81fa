//! Field snapshots: a raw `.bin` file of little-endian `f64` values and a
//! `.json` sidecar describing it.
//!
//! Each component is stored row-major with `y` as the slow index; vector
//! fields store the whole `u` block followed by the whole `v` block. The
//! sidecar lists every block with its shape and element offset.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, StaggeredVectorField};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    /// Values along `y`.
    pub rows: usize,
    /// Values along `x`.
    pub cols: usize,
    /// First element of the block, in values.
    pub offset: usize,
    /// `cell_centers`, `x_faces` or `y_faces`.
    pub location: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub field: String,
    pub units: String,
    pub dtype: String,
    pub grid: GridSpec,
    pub blocks: Vec<Block>,
    /// File name of the data file, relative to the sidecar.
    pub data: String,
}

fn write_pair(dir: &Path, stem: &str, sidecar: &Sidecar, values: &[f64]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin = dir.join(format!("{stem}.bin"));
    let mut bytes = Vec::with_capacity(8 * values.len());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let json = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
    Ok(json)
}

pub fn write_scalar(dir: &Path, stem: &str, field: &str, units: &str, p: &ScalarField) -> Result<PathBuf> {
    let g = p.grid;
    let sidecar = Sidecar {
        format_version: SNAPSHOT_VERSION,
        field: field.into(),
        units: units.into(),
        dtype: "f64le".into(),
        grid: g,
        blocks: vec![Block {
            name: field.into(),
            rows: g.ny,
            cols: g.nx,
            offset: 0,
            location: "cell_centers".into(),
        }],
        data: format!("{stem}.bin"),
    };
    write_pair(dir, stem, &sidecar, &p.values)
}

pub fn write_vector(
    dir: &Path,
    stem: &str,
    field: &str,
    units: &str,
    u: &StaggeredVectorField,
) -> Result<PathBuf> {
    let g = u.grid;
    let sidecar = Sidecar {
        format_version: SNAPSHOT_VERSION,
        field: field.into(),
        units: units.into(),
        dtype: "f64le".into(),
        grid: g,
        blocks: vec![
            Block {
                name: "u".into(),
                rows: g.ny,
                cols: g.u_cols(),
                offset: 0,
                location: "x_faces".into(),
            },
            Block {
                name: "v".into(),
                rows: g.v_rows(),
                cols: g.nx,
                offset: g.n_u(),
                location: "y_faces".into(),
            },
        ],
        data: format!("{stem}.bin"),
    };
    write_pair(dir, stem, &sidecar, &u.to_flat())
}

/// Reads a sidecar and its data file.
pub fn read_snapshot(sidecar: &Path) -> Result<(Sidecar, Vec<f64>)> {
    let text = fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
    let meta: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", sidecar.display())))?;
    let bin = sidecar.with_file_name(&meta.data);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::structure(format!("{} is not a whole number of f64 values", bin.display())));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let expected: usize = meta.blocks.iter().map(|b| b.rows * b.cols).sum();
    if values.len() != expected {
        return Err(Error::structure(format!(
            "{} holds {} values, the sidecar describes {expected}",
            bin.display(),
            values.len()
        )));
    }
    Ok((meta, values))
}
