//! Binary volume files.
//!
//! ```text
//! magic "THCV" | version u16 | ndim u8 | dims u32 x ndim | values f32 x prod(dims)
//! ```
//!
//! Integers and floats are little-endian; values are row-major.

use super::DataError;
use crate::tensor::Tensor;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"THCV";
pub const VERSION: u16 = 1;

/// Serializes `t`. Values are narrowed to `f32`.
pub fn encode_volume(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(7 + 4 * t.shape().len() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(t.shape().len() as u8);
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn truncated() -> DataError {
    DataError::Io(std::io::Error::new(
        std::io::ErrorKind::UnexpectedEof,
        "truncated volume file",
    ))
}

pub fn decode_volume(bytes: &[u8]) -> Result<Tensor, DataError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(DataError::BadMagic);
    }
    let header = bytes.get(4..7).ok_or_else(truncated)?;
    let version = u16::from_le_bytes([header[0], header[1]]);
    if version != VERSION {
        return Err(DataError::VersionMismatch(version));
    }
    let ndim = header[2] as usize;
    let dims_end = 7 + 4 * ndim;
    let dims: Vec<usize> = bytes
        .get(7..dims_end)
        .ok_or_else(truncated)?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| DataError::Corrupt("volume dimensions overflow".into()))?;
    let body = &bytes[dims_end..];
    if body.len() < count.saturating_mul(4) {
        return Err(truncated());
    }
    if body.len() > count * 4 {
        return Err(DataError::Corrupt("trailing bytes after volume data".into()));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Tensor::new(dims, data).map_err(|e| DataError::Corrupt(e.to_string()))
}

pub fn save_volume(t: &Tensor, path: &Path) -> Result<(), DataError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_volume(t))?;
    Ok(())
}

pub fn load_volume(path: &Path) -> Result<Tensor, DataError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_volume(&bytes)
}
