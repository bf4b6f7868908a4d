//! Model checkpoints: magic `PGCK`, a version byte, then a named tensor table
//! (`u32` count; per tensor `u32` name length, UTF-8 name, `u32` rows,
//! `u32` cols, rows × cols little-endian f64). Configuration travels as
//! `meta.*` tensors.

use std::path::Path;

use pitchgraph_core::autodiff::Tensor;
use pitchgraph_core::gnn::ModelParams;

use super::binio::{Reader, Writer};
use crate::error::{PipelineError, Result};
use crate::fsutil;

pub const VERSION: u8 = 1;
const MAGIC: &[u8; 4] = b"PGCK";

pub fn encode_checkpoint(p: &ModelParams) -> Vec<u8> {
    let named = p.to_named_tensors();
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u8(VERSION);
    w.u32(named.len() as u32);
    for (name, t) in &named {
        w.u32(name.len() as u32);
        w.bytes(name.as_bytes());
        w.u32(t.rows as u32);
        w.u32(t.cols as u32);
        t.data.iter().for_each(|&v| w.f64(v));
    }
    w.0
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<ModelParams, String> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let n = r.count(12)?;
    let mut named = Vec::with_capacity(n);
    for _ in 0..n {
        let len = r.count(1)?;
        let name = std::str::from_utf8(r.take(len)?).map_err(|e| e.to_string())?.to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let len = rows.checked_mul(cols).ok_or("tensor shape overflows")?;
        let raw = r.take(len.checked_mul(8).ok_or("tensor shape overflows")?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        named.push((name, Tensor { rows, cols, data }));
    }
    r.finish()?;
    ModelParams::from_named_tensors(named).map_err(|e| e.to_string())
}

pub fn write_checkpoint(path: &Path, p: &ModelParams) -> Result<()> {
    fsutil::write_atomic(path, &encode_checkpoint(p))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    decode_checkpoint(&fsutil::read(path)?).map_err(|m| PipelineError::format(path, m))
}
