//! Field snapshots: raw little-endian `f64` samples in `(i, j)` row-major order,
//! `i` along `x₁`, with a JSON sidecar carrying the grid and time.
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, RealField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
    pub dtype: String,
    pub layout: String,
}

impl Sidecar {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny, self.lx, self.ly)
    }
}

/// Writes `<dir>/<name>.bin` and `<dir>/<name>.json`; returns the `.bin` path.
pub fn write_snapshot(dir: &Path, name: &str, field: &RealField, t: f64) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let g = field.grid();
    let bytes: Vec<u8> = field.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    let bin = dir.join(format!("{name}.bin"));
    fs::write(&bin, bytes)?;
    let side = Sidecar {
        name: name.to_string(),
        nx: g.nx(),
        ny: g.ny(),
        lx: g.lx(),
        ly: g.ly(),
        t,
        dtype: "f64le".into(),
        layout: "row_major_x1_x2".into(),
    };
    fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&side)?)?;
    Ok(bin)
}

/// Reads a snapshot given its `.bin` path.
pub fn read_snapshot(bin: &Path) -> Result<(RealField, Sidecar)> {
    let side: Sidecar = serde_json::from_slice(&fs::read(bin.with_extension("json"))?)?;
    let g = side.grid()?;
    let bytes = fs::read(bin)?;
    if bytes.len() != 8 * g.len() {
        return Err(Error::InvalidParameter(format!(
            "{} holds {} bytes, expected {}",
            bin.display(),
            bytes.len(),
            8 * g.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((RealField::new(&g, data)?, side))
}
