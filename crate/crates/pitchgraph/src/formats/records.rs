//! Frame records: one JSON object per line.

use std::path::Path;

use pitchgraph_core::geometry::Homography;
use pitchgraph_core::ingest::{self, Detection, FrameRecord};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::fsutil;

/// The on-disk shape. The homography is read as nested lists so a wrong
/// shape is reported as a validation error rather than a parse error.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    frame_index: u32,
    timestamp_s: f64,
    detections: Vec<Detection>,
    homography: Vec<Vec<f64>>,
    calib_confidence: f64,
    frame_size: (u32, u32),
}

fn homography(rows: &[Vec<f64>], frame: u32) -> pitchgraph_core::Result<Homography> {
    if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
        let shape: Vec<usize> = rows.iter().map(Vec::len).collect();
        return Err(pitchgraph_core::Error::Validation(format!("frame {frame}: homography must be 3x3, got row lengths {shape:?}")));
    }
    Ok(Homography::from_rows([0, 1, 2].map(|r| [rows[r][0], rows[r][1], rows[r][2]])))
}

/// Parses, sorts by frame index and validates every record.
pub fn parse_frame_records(text: &str, path: &Path) -> Result<Vec<FrameRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|e| PipelineError::Parse { path: path.into(), line: i + 1, msg: e.to_string() })?;
        let homography = homography(&raw.homography, raw.frame_index)?;
        out.push(FrameRecord {
            frame_index: raw.frame_index,
            timestamp_s: raw.timestamp_s,
            detections: raw.detections,
            homography,
            calib_confidence: raw.calib_confidence,
            frame_size: raw.frame_size,
        });
    }
    ingest::validate_sequence(&mut out)?;
    Ok(out)
}

pub fn load_frame_records(path: &Path) -> Result<Vec<FrameRecord>> {
    parse_frame_records(&fsutil::read_string(path)?, path)
}

pub fn record_line(r: &FrameRecord) -> String {
    let raw = RawRecord {
        frame_index: r.frame_index,
        timestamp_s: r.timestamp_s,
        detections: r.detections.clone(),
        homography: r.homography.0.iter().map(|row| row.to_vec()).collect(),
        calib_confidence: r.calib_confidence,
        frame_size: r.frame_size,
    };
    serde_json::to_string(&raw).expect("records serialize")
}

pub fn write_frame_records(path: &Path, records: &[FrameRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&record_line(r));
        text.push('\n');
    }
    fsutil::write_atomic(path, text.as_bytes())
}
