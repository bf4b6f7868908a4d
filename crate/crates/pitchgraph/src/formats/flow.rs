//! `.pgf` optical-flow files: magic `PGF1`, little-endian `u32` width and
//! height, then `width × height` pairs of little-endian `f32` (u, v), row-major.

use std::path::Path;

use pitchgraph_core::ingest::FlowField;

use crate::error::{PipelineError, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 4] = b"PGF1";
const HEADER: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlowError {
    #[error("bad magic {0:?}, expected \"PGF1\"")]
    Magic([u8; 4]),
    #[error("payload is {got} bytes, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("{0}")]
    Invalid(String),
}

pub fn encode_flow(f: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * f.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&f.width.to_le_bytes());
    out.extend_from_slice(&f.height.to_le_bytes());
    for [u, v] in &f.values {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flow(bytes: &[u8]) -> std::result::Result<FlowField, FlowError> {
    if bytes.len() < 4 {
        return Err(FlowError::Length { expected: HEADER, got: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != MAGIC {
        return Err(FlowError::Magic(magic));
    }
    if bytes.len() < HEADER {
        return Err(FlowError::Length { expected: HEADER, got: bytes.len() });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (width, height) = (word(4), word(8));
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER))
        .ok_or(FlowError::Invalid(format!("{width}x{height} flow is too large")))?;
    if bytes.len() != expected {
        return Err(FlowError::Length { expected, got: bytes.len() });
    }
    let values = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| [f32::from_le_bytes(c[..4].try_into().unwrap()), f32::from_le_bytes(c[4..].try_into().unwrap())])
        .collect();
    FlowField::new(width, height, values).map_err(|e| FlowError::Invalid(e.to_string()))
}

pub fn load_flow_field(path: &Path) -> Result<FlowField> {
    decode_flow(&fsutil::read(path)?).map_err(|e| PipelineError::format(path, e.to_string()))
}

pub fn write_flow_field(path: &Path, f: &FlowField) -> Result<()> {
    fsutil::write_atomic(path, &encode_flow(f))
}
