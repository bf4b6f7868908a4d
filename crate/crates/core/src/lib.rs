//! Core algorithms for spotting soccer actions from sequences of player graphs.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem (record parsing, binary caches, images, the CLI) lives in the
//! `pitchgraph` companion crate; this crate works on in-memory values only.
//!
//! Pipeline, bottom-up:
//!
//! - [`ingest`]: detections, frame records, flow fields and their filters.
//! - [`geometry`]: pitch template, homography projection, view rules.
//! - [`colorfeat`]: L\*a\*b\* conversion, mask erosion, a\*b\* histograms and
//!   the Bhattacharyya distance.
//! - [`teamcluster`]: unsupervised 5-class player classification.
//! - [`motion`]: fixed overlays, field segmentation, dominant flow.
//! - [`graph`]: per-frame player graphs and 15 s windows.
//! - [`gnn`]: dynamic edge convolution + dual NetVLAD spotting network.
//! - [`spotting`]: inference, NMS and tolerance-windowed average-mAP.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod actions;
pub mod autodiff;
pub mod cluster;
pub mod colorfeat;
mod error;
pub mod fmath;
pub mod geometry;
pub mod gnn;
pub mod graph;
pub mod image;
pub mod ingest;
pub mod motion;
pub mod optim;
pub mod spotting;
pub mod teamcluster;

pub use error::{Error, Result};
