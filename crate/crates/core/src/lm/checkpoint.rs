//! Versioned binary checkpoints: a fixed header (magic, version,
//! config) followed by the raw little-endian f32 tensors in declared
//! order.

use std::io::{Read, Write};
use std::path::Path;

use super::model::{LmConfig, LmError, Params};

const MAGIC: &[u8; 4] = b"RVLM";
const VERSION: u32 = 1;

pub fn save_checkpoint(params: &Params<f32>, path: &Path) -> Result<(), LmError> {
    let mut buf = Vec::with_capacity(64 + params.param_count() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let c = params.config;
    for v in [
        c.vocab_size,
        c.context_len,
        c.layers,
        c.heads,
        c.model_dim,
        c.ff_dim,
    ] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&c.seed.to_le_bytes());
    for t in params.tensors() {
        for &x in &t.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)
        .map_err(|e| LmError::Checkpoint(format!("create {}: {e}", path.display())))?;
    f.write_all(&buf)
        .map_err(|e| LmError::Checkpoint(format!("write {}: {e}", path.display())))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Params<f32>, LmError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| LmError::Checkpoint(format!("open {}: {e}", path.display())))?
        .read_to_end(&mut bytes)
        .map_err(|e| LmError::Checkpoint(format!("read {}: {e}", path.display())))?;
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8], LmError> {
        if *off + n > bytes.len() {
            return Err(LmError::Checkpoint("truncated checkpoint".into()));
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };

    if take(&mut off, 4)? != MAGIC {
        return Err(LmError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(LmError::Checkpoint(format!(
            "unsupported version {version} (expected {VERSION})"
        )));
    }
    let mut dims = [0u32; 6];
    for d in &mut dims {
        *d = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
    }
    let seed = u64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap());
    let config = LmConfig {
        vocab_size: dims[0] as usize,
        context_len: dims[1] as usize,
        layers: dims[2] as usize,
        heads: dims[3] as usize,
        model_dim: dims[4] as usize,
        ff_dim: dims[5] as usize,
        seed,
    };
    config
        .validate()
        .map_err(|e| LmError::Checkpoint(format!("invalid stored config: {e}")))?;

    let mut params: Params<f32> = Params::init(config)?;
    let expected = params.param_count() * 4;
    let remaining = bytes.len() - off;
    if remaining != expected {
        return Err(LmError::Checkpoint(format!(
            "tensor payload is {remaining} bytes, expected {expected}"
        )));
    }
    for t in params.tensors_mut() {
        for x in &mut t.data {
            *x = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            off += 4;
        }
    }
    Ok(params)
}
