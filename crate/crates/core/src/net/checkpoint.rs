//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "THCM" | version u16 | H u32 | W u32 | C u32 | levels u32
//! | channels u32 x levels | clinical_dim u32 | n_dense u32
//! | dense widths u32 x n_dense | seed u64 | parameters f64 x count
//! ```
//!
//! Parameters follow the model's block order. The parameter count is implied
//! by the configuration and the file must end right after the last value.

use super::model::{Model, ModelConfig};
use std::io::{self, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"THCM";
pub const VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    VersionMismatch(u16),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<(), CheckpointError> {
    let v = u32::try_from(v).map_err(|_| CheckpointError::Corrupt(format!("{v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode(model: &Model) -> Result<Vec<u8>, CheckpointError> {
    let c = model.config();
    let mut out = Vec::with_capacity(64 + 8 * model.num_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in c.input_shape {
        put_u32(&mut out, d)?;
    }
    put_u32(&mut out, c.encoder_levels)?;
    for &ch in &c.channels_per_level {
        put_u32(&mut out, ch)?;
    }
    put_u32(&mut out, c.clinical_dim)?;
    put_u32(&mut out, c.dense_widths.len())?;
    for &w in &c.dense_widths {
        put_u32(&mut out, w)?;
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    for v in model.params().iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        if self.buf.len() < N {
            return Err(CheckpointError::Corrupt("unexpected end of file".into()));
        }
        let (head, rest) = self.buf.split_at(N);
        self.buf = rest;
        Ok(head.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }

    /// Reads a count that must be small enough to be a layer dimension.
    fn count(&mut self, what: &str) -> Result<usize, CheckpointError> {
        let v = self.u32()?;
        if v > 1 << 16 {
            return Err(CheckpointError::Corrupt(format!("implausible {what} {v}")));
        }
        Ok(v)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model, CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut cur = Cursor { buf: &bytes[4..] };
    let version = u16::from_le_bytes(cur.take()?);
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch(version));
    }
    let input_shape = [cur.u32()?, cur.u32()?, cur.u32()?];
    let levels = cur.count("level count")?;
    let channels_per_level = (0..levels)
        .map(|_| cur.count("channel width"))
        .collect::<Result<Vec<_>, _>>()?;
    let clinical_dim = cur.count("clinical width")?;
    let n_dense = cur.count("dense layer count")?;
    let dense_widths = (0..n_dense)
        .map(|_| cur.count("dense width"))
        .collect::<Result<Vec<_>, _>>()?;
    let seed = u64::from_le_bytes(cur.take()?);
    let config = ModelConfig {
        input_shape,
        encoder_levels: levels,
        channels_per_level,
        clinical_dim,
        dense_widths,
        seed,
    };
    let mut model = Model::build(config).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let expected = model.num_parameters() * 8;
    if cur.buf.len() != expected {
        return Err(CheckpointError::Corrupt(format!(
            "expected {expected} parameter bytes, found {}",
            cur.buf.len()
        )));
    }
    let params = model
        .params()
        .iter()
        .map(|block| {
            (0..block.len())
                .map(|_| Ok(f64::from_le_bytes(cur.take()?)))
                .collect::<Result<Vec<f64>, CheckpointError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    model
        .load_params(params)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    Ok(model)
}

pub fn save(model: &Model, path: &Path) -> Result<(), CheckpointError> {
    let bytes = encode(model)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model, CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
