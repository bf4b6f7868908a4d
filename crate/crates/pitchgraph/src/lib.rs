//! Batch pipeline around `pitchgraph-core`: file formats, a cached stage
//! runner, a synthetic match generator and the `pitchgraph` binary.

pub use pitchgraph_core as core;

pub mod error;
pub mod config;
pub mod formats;
pub mod fsutil;
pub mod pipeline;
pub mod synth;

pub use error::{PipelineError, Result};
