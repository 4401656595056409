//! Trained-model persistence: a JSON header describing the task binding and
//! a flat little-endian f64 weight file.
//!
//! The header carries everything evaluation needs (architecture, parameter
//! channel scales, training grid, model horizon), so a checkpoint can be
//! stressed without the original campaign config. Both files are written
//! deterministically; byte equality before and after a stress run is the
//! contract that evaluation never mutates weights.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fno::{param_count, FnoConfig, FnoParams};
use crate::grid::GridSpec;
use crate::problems::InputEncoding;

pub const HEADER_FILE: &str = "checkpoint.header.json";
pub const PARAMS_FILE: &str = "checkpoint.params.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub pde: String,
    pub seed: u64,
    pub fno: FnoConfig,
    pub encoding: InputEncoding,
    pub train_grid: GridSpec,
    /// Model time step for time-dependent tasks, absent for stationary ones.
    pub horizon: Option<f64>,
}

pub fn header_path(dir: &Path) -> PathBuf {
    dir.join(HEADER_FILE)
}

pub fn params_path(dir: &Path) -> PathBuf {
    dir.join(PARAMS_FILE)
}

pub fn save_checkpoint(dir: &Path, header: &CheckpointHeader, params: &FnoParams) -> Result<()> {
    if header.fno != *params.cfg() {
        return Err(Error::Checkpoint(
            "header architecture does not match the weights".into(),
        ));
    }
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(header)?;
    json.push('\n');
    fs::write(header_path(dir), json)?;

    let flat = params.as_flat();
    let mut buf = Vec::with_capacity(8 + 8 * flat.len());
    buf.extend_from_slice(&(flat.len() as u64).to_le_bytes());
    for v in flat {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(params_path(dir), buf)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(CheckpointHeader, FnoParams)> {
    let header: CheckpointHeader = serde_json::from_str(&fs::read_to_string(header_path(dir))?)?;
    let want = param_count(&header.fno);

    let mut file = fs::File::open(params_path(dir))?;
    let mut count_bytes = [0u8; 8];
    file.read_exact(&mut count_bytes)?;
    let count = u64::from_le_bytes(count_bytes) as usize;
    if count != want {
        return Err(Error::Checkpoint(format!(
            "weight file holds {count} values, header architecture needs {want}"
        )));
    }
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if payload.len() != 8 * count {
        return Err(Error::Checkpoint(format!(
            "weight file payload is {} bytes, expected {}",
            payload.len(),
            8 * count
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint("weight file holds non-finite values".into()));
    }
    let params = FnoParams::from_flat(header.fno.clone(), data)?;
    Ok((header, params))
}

/// FNV-1a over both checkpoint files; used to assert evaluation leaves a
/// checkpoint byte-identical.
pub fn checkpoint_digest(dir: &Path) -> Result<u64> {
    let mut hash: u64 = 0xcbf29ce484222325;
    for path in [header_path(dir), params_path(dir)] {
        for b in fs::read(&path)? {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    }
    Ok(hash)
}

/// Streaming writer is unnecessary at these sizes; kept as a seam if weight
/// counts ever grow past memory comfort.
#[allow(dead_code)]
fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}
