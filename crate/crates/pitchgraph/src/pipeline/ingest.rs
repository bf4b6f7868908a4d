use pitchgraph_core::colorfeat::{ab_histogram, erode_mask};
use pitchgraph_core::geometry::{foot_point, project_to_pitch};
use pitchgraph_core::ingest::filter_detections;
use pitchgraph_core::Error as CoreError;

use super::artifacts::{FrameEntry, PeopleArtifact, PersonEntry};
use super::Stage;
use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::formats::{frames, records};
use crate::fsutil;

pub(super) fn run(cfg: &PipelineConfig) -> Result<String> {
    let records = records::load_frame_records(&cfg.paths.records)?;
    let mut out = Vec::with_capacity(records.len());
    let (mut dropped_people, mut dropped_frames) = (0usize, 0usize);
    for r in &records {
        let mut entry = FrameEntry {
            frame_index: r.frame_index,
            timestamp_s: r.timestamp_s,
            kept: cfg.filter.keeps_frame(r),
            calib_confidence: r.calib_confidence,
            frame_center: None,
            people: Vec::new(),
        };
        if !entry.kept {
            dropped_frames += 1;
            out.push(entry);
            continue;
        }
        let path = frames::frame_path(&cfg.paths.frames_dir, r.frame_index);
        let img = frames::load_frame(&path)?;
        let (w, h) = (img.width(), img.height());
        if (w as u32, h as u32) != r.frame_size {
            return Err(PipelineError::format(&path, format!("image is {w}x{h}, record says {}x{}", r.frame_size.0, r.frame_size.1)));
        }
        entry.frame_center = Some(project_to_pitch((w as f64 / 2.0, h as f64 / 2.0), &r.homography)?);
        for d in filter_detections(r, &cfg.filter) {
            let mask = erode_mask(&d.full_mask(w, h), cfg.colorfeat.erosion_radius);
            let hist = match ab_histogram(&img, &mask) {
                Ok(hist) => hist,
                Err(CoreError::EmptySupport) => {
                    dropped_people += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let Ok(position) = project_to_pitch(foot_point(&d.bbox), &r.homography) else {
                dropped_people += 1;
                continue;
            };
            entry.people.push(PersonEntry { detection_id: d.id, bbox: d.bbox, area_norm: d.bbox.area() / r.frame_area(), position, hist });
        }
        out.push(entry);
    }
    let artifact = PeopleArtifact { frames: out };
    fsutil::write_json(&Stage::Ingest.artifact(&cfg.paths.cache_dir), &artifact)?;
    Ok(format!(
        "ingest: {} frames ({} dropped), {} people ({} without usable pixels or position)",
        records.len(),
        dropped_frames,
        artifact.people_count(),
        dropped_people
    ))
}
