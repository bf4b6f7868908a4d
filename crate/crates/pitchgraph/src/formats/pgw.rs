//! `graphs.pgw`: the frame table and windows of a [`Dataset`].
//!
//! ```text
//! u8  version (1)           then b"PGW"
//! u32 node_dim
//! u32 n_fusion, n_fusion × u32 width
//! u32 n_frames, per frame:
//!     f32 timestamp_s, u32 n_nodes, u32 n_edges,
//!     n_nodes × node_dim f32, n_edges × (u32 i, u32 j)
//! u32 n_windows, per window:
//!     f32 center_time_s, u32 label, 30 × u32 frame (0xFFFF_FFFF = empty),
//!     Σ width f32 fusion values
//! ```
//! All integers and floats little-endian. Values are stored as f32.

use std::path::Path;

use pitchgraph_core::gnn::{Dataset, WindowSample};
use pitchgraph_core::graph::{NodeFeatures, PlayerGraph, NODE_DIM, WINDOW_SLOTS};

use super::binio::{Reader, Writer};
use crate::error::{PipelineError, Result};
use crate::fsutil;

pub const VERSION: u8 = 1;
const MAGIC: &[u8; 3] = b"PGW";
const EMPTY: u32 = u32::MAX;

pub fn encode_dataset(ds: &Dataset, fusion_dims: &[usize]) -> Vec<u8> {
    let mut w = Writer::default();
    w.u8(VERSION);
    w.bytes(MAGIC);
    w.u32(NODE_DIM as u32);
    w.u32(fusion_dims.len() as u32);
    fusion_dims.iter().for_each(|&d| w.u32(d as u32));
    w.u32(ds.frames.len() as u32);
    for g in &ds.frames {
        w.f32(g.timestamp_s as f32);
        w.u32(g.nodes.len() as u32);
        w.u32(g.edges.len() as u32);
        for n in &g.nodes {
            n.0.iter().for_each(|&v| w.f32(v as f32));
        }
        for &(i, j) in &g.edges {
            w.u32(i);
            w.u32(j);
        }
    }
    w.u32(ds.windows.len() as u32);
    for win in &ds.windows {
        w.f32(win.center_time_s as f32);
        w.u32(win.label as u32);
        win.slots.iter().for_each(|s| w.u32(s.unwrap_or(EMPTY)));
        win.fusion.iter().flatten().for_each(|&v| w.f32(v as f32));
    }
    w.0
}

/// Returns the dataset and the fusion widths recorded in the header.
pub fn decode_dataset(bytes: &[u8]) -> std::result::Result<(Dataset, Vec<usize>), String> {
    let mut r = Reader::new(bytes);
    let version = r.u8()?;
    if version != VERSION {
        return Err(format!("unsupported graph cache version {version}"));
    }
    if r.take(3)? != MAGIC {
        return Err("not a graph cache (bad magic)".into());
    }
    let node_dim = r.u32()? as usize;
    if node_dim != NODE_DIM {
        return Err(format!("node width {node_dim}, expected {NODE_DIM}"));
    }
    let n_fusion = r.count(4)?;
    let fusion_dims = (0..n_fusion).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
    let n_frames = r.count(12)?;
    let mut frames = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let t = r.f32()? as f64;
        let n = r.count(4 * NODE_DIM)?;
        let e = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let mut v = [0.0; NODE_DIM];
            for x in &mut v {
                *x = r.f32()? as f64;
            }
            nodes.push(NodeFeatures(v));
        }
        let mut edges = Vec::new();
        for _ in 0..e {
            edges.push((r.u32()?, r.u32()?));
        }
        let g = PlayerGraph { timestamp_s: t, nodes, edges };
        g.validate().map_err(|e| e.to_string())?;
        frames.push(g);
    }
    let per_window = 8 + 4 * WINDOW_SLOTS + 4 * fusion_dims.iter().sum::<usize>();
    let n_windows = r.count(per_window)?;
    let mut windows = Vec::with_capacity(n_windows);
    for _ in 0..n_windows {
        let center_time_s = r.f32()? as f64;
        let label = r.u32()? as usize;
        let mut slots = Vec::with_capacity(WINDOW_SLOTS);
        for _ in 0..WINDOW_SLOTS {
            let s = r.u32()?;
            slots.push((s != EMPTY).then_some(s));
        }
        let mut fusion = Vec::with_capacity(fusion_dims.len());
        for &d in &fusion_dims {
            fusion.push((0..d).map(|_| r.f32().map(|v| v as f64)).collect::<Result<Vec<_>, _>>()?);
        }
        windows.push(WindowSample { center_time_s, slots, label, fusion });
    }
    r.finish()?;
    let ds = Dataset { frames, windows };
    ds.validate(&fusion_dims).map_err(|e| e.to_string())?;
    Ok((ds, fusion_dims))
}

pub fn write_dataset(path: &Path, ds: &Dataset, fusion_dims: &[usize]) -> Result<()> {
    fsutil::write_atomic(path, &encode_dataset(ds, fusion_dims))
}

pub fn load_dataset(path: &Path) -> Result<(Dataset, Vec<usize>)> {
    decode_dataset(&fsutil::read(path)?).map_err(|m| PipelineError::format(path, m))
}
