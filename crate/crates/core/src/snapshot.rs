//! Snapshot files: one line of JSON header, then `nx * ny` little-endian
//! f64 values in row-major `[nx][ny]` order.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::grid::{CylGrid, Field};

pub const FORMAT: &str = "zk-snapshot";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub version: u32,
    pub nx: usize,
    pub ny: usize,
    pub half_width: f64,
    pub period: f64,
    pub time: f64,
    pub experiment: String,
    pub config_hash: String,
    pub layout: String,
}

impl SnapshotHeader {
    pub fn new(grid: &CylGrid, time: f64, experiment: &str, config_hash: &str) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            nx: grid.nx(),
            ny: grid.ny(),
            half_width: grid.half_width(),
            period: grid.period(),
            time,
            experiment: experiment.into(),
            config_hash: config_hash.into(),
            layout: "row-major [nx][ny] f64 little-endian".into(),
        }
    }
}

pub fn encode(field: &Field, header: &SnapshotHeader) -> Result<Vec<u8>> {
    if header.nx * header.ny != field.values().len() {
        return Err(ZkError::Format("header dimensions disagree with the field".into()));
    }
    let mut out = serde_json::to_vec(header).map_err(|e| ZkError::Format(e.to_string()))?;
    out.push(b'\n');
    out.reserve(field.values().len() * 8);
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(SnapshotHeader, Field)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ZkError::Format("missing header line".into()))?;
    let header: SnapshotHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| ZkError::Format(format!("header: {e}")))?;
    if header.format != FORMAT {
        return Err(ZkError::Format(format!("unknown format `{}`", header.format)));
    }
    if header.version != VERSION {
        return Err(ZkError::Format(format!(
            "version {} is not supported (expected {VERSION})",
            header.version
        )));
    }
    let payload = &bytes[nl + 1..];
    let expect = header.nx * header.ny * 8;
    if payload.len() != expect {
        return Err(ZkError::Format(format!(
            "payload has {} bytes, header declares {expect}",
            payload.len()
        )));
    }
    let grid: Arc<CylGrid> = CylGrid::new(header.nx, header.ny, header.half_width, header.period)?;
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let field = Field::from_values(&grid, values).map_err(|e| ZkError::Format(e.to_string()))?;
    Ok((header, field))
}

pub fn save_snapshot(path: &Path, field: &Field, header: &SnapshotHeader) -> Result<()> {
    let bytes = encode(field, header)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<(SnapshotHeader, Field)> {
    decode(&fs::read(path)?)
}
