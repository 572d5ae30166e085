//! `SFDESC1` descriptor files.
//!
//! Little-endian layout:
//!
//! | offset | size          | field                          |
//! |--------|---------------|--------------------------------|
//! | 0      | 8             | magic `b"SFDESC1\0"`           |
//! | 8      | 4             | `u32` row count                |
//! | 12     | 4             | `u32` dimension                |
//! | 16     | 4·count·dim   | `f32` values, row-major        |
//!
//! Values are held as `f64` in memory and rounded to `f32` when written.

use std::path::Path;

use super::DescriptorSet;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::technique::TechniqueId;

pub const MAGIC: &[u8; 8] = b"SFDESC1\0";
const HEADER_LEN: usize = 16;

pub fn encode(set: &DescriptorSet) -> Result<Vec<u8>> {
    let count = u32::try_from(set.len()).map_err(|_| Error::invalid("too many descriptor rows"))?;
    let dim = u32::try_from(set.dim()).map_err(|_| Error::invalid("descriptor dimension too large"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * set.len() * set.dim());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for row in set.rows() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], technique_id: TechniqueId) -> Result<DescriptorSet> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("truncated SFDESC1 header".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format("bad magic, expected SFDESC1".into()));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if count == 0 || dim == 0 {
        return Err(Error::EmptySet(format!(
            "`{technique_id}` header declares count={count}, dim={dim}"
        )));
    }
    let expected = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("SFDESC1 header overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "SFDESC1 payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    DescriptorSet::new(technique_id, dim, values)
}

pub fn load_descriptor_set(path: &Path, technique_id: TechniqueId) -> Result<DescriptorSet> {
    let bytes = crate::io::read(path)?;
    decode(&bytes, technique_id).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_descriptor_set(set: &DescriptorSet, path: &Path) -> Result<()> {
    write_atomic(path, &encode(set)?)
}
