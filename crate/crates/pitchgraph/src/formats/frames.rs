//! Decoded video frames as 8-bit RGB PNG files, one per frame index.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::ImageFormat;
use pitchgraph_core::image::RgbImage;

use crate::error::{PipelineError, Result};
use crate::fsutil;

pub fn frame_path(dir: &Path, frame_index: u32) -> PathBuf {
    dir.join(format!("{frame_index:06}.png"))
}

pub fn flow_path(dir: &Path, frame_index: u32) -> PathBuf {
    dir.join(format!("{frame_index:06}.pgf"))
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let raw: Vec<u8> = img.pixels().iter().flatten().copied().collect();
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, raw).expect("pixel count matches the size");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding does not fail");
    out.into_inner()
}

pub fn decode_png(bytes: &[u8]) -> std::result::Result<RgbImage, String> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| e.to_string())?.to_rgb8();
    let (w, h) = img.dimensions();
    let pixels = img.pixels().map(|p| p.0).collect();
    RgbImage::new(w as usize, h as usize, pixels).map_err(|e| e.to_string())
}

pub fn load_frame(path: &Path) -> Result<RgbImage> {
    decode_png(&fsutil::read(path)?).map_err(|m| PipelineError::format(path, m))
}

pub fn write_frame(path: &Path, img: &RgbImage) -> Result<()> {
    fsutil::write_atomic(path, &encode_png(img))
}
