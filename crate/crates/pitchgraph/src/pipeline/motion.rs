use std::collections::BTreeMap;

use pitchgraph_core::image::BinaryMask;
use pitchgraph_core::ingest::FlowField;
use pitchgraph_core::motion::{detect_fixed_regions, dominant_flow, fixed_region_present, player_motion, sample_indices, segment_field, MotionVector};
use pitchgraph_core::Error as CoreError;

use super::artifacts::{FrameMotion, MotionArtifact, PeopleArtifact};
use super::Stage;
use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::formats::{flow, frames, records};
use crate::fsutil;

fn load_flow(cfg: &PipelineConfig, frame_index: u32, size: (usize, usize)) -> Result<FlowField> {
    let path = frames::flow_path(&cfg.paths.flows_dir, frame_index);
    let f = flow::load_flow_field(&path)?;
    if (f.width as usize, f.height as usize) != size {
        return Err(PipelineError::format(&path, format!("flow is {}x{}, frame is {}x{}", f.width, f.height, size.0, size.1)));
    }
    Ok(f)
}

pub(super) fn run(cfg: &PipelineConfig) -> Result<String> {
    let cache = &cfg.paths.cache_dir;
    let people: PeopleArtifact = fsutil::read_json(&Stage::Ingest.artifact(cache))?;
    let records = records::load_frame_records(&cfg.paths.records)?;
    let by_index: BTreeMap<u32, usize> = records.iter().enumerate().map(|(i, r)| (r.frame_index, i)).collect();

    // Fixed overlays, from a uniform sample over the whole match.
    let mut sample_flows = Vec::new();
    let mut sample_frames = Vec::new();
    for i in sample_indices(records.len(), &cfg.motion) {
        let r = &records[i];
        let img = frames::load_frame(&frames::frame_path(&cfg.paths.frames_dir, r.frame_index))?;
        sample_flows.push(load_flow(cfg, r.frame_index, (img.width(), img.height()))?);
        sample_frames.push(img);
    }
    let regions = match detect_fixed_regions(&sample_flows, &sample_frames, &cfg.motion, cfg.seed) {
        Ok(r) => r,
        Err(CoreError::InsufficientData(_)) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    drop((sample_flows, sample_frames));

    let mut out = Vec::new();
    let mut no_field = 0usize;
    for f in people.kept() {
        let r = &records[*by_index.get(&f.frame_index).ok_or_else(|| {
            PipelineError::format(&cfg.paths.records, format!("frame {} is in the ingest artifact but not in the records", f.frame_index))
        })?];
        let img = frames::load_frame(&frames::frame_path(&cfg.paths.frames_dir, r.frame_index))?;
        let (w, h) = (img.width(), img.height());
        let fl = load_flow(cfg, r.frame_index, (w, h))?;
        let mut excluded = BinaryMask::empty(w, h);
        for d in &r.detections {
            excluded.or_assign(&d.full_mask(w, h));
        }
        for region in regions.iter().filter(|reg| reg.mask.width() == w && reg.mask.height() == h) {
            if fixed_region_present(&img, region, &cfg.motion) {
                excluded.or_assign(&region.mask);
            }
        }
        let field = match segment_field(&img, &excluded, &cfg.motion, cfg.seed) {
            Ok(mask) => Some(dominant_flow(&fl, &mask)?),
            Err(CoreError::EmptyField) => None,
            Err(e) => return Err(e.into()),
        };
        no_field += field.is_none() as usize;
        let base = field.unwrap_or(MotionVector::ZERO);
        let mut moves = Vec::with_capacity(f.people.len());
        for p in &f.people {
            let det = r.detections.iter().find(|d| d.id == p.detection_id).ok_or_else(|| {
                PipelineError::format(&cfg.paths.records, format!("frame {}: detection {} vanished", f.frame_index, p.detection_id))
            })?;
            let mask = det.full_mask(w, h);
            let own = if mask.count() == 0 { MotionVector::ZERO } else { dominant_flow(&fl, &mask)? };
            moves.push(player_motion(own, base));
        }
        out.push(FrameMotion { frame_index: f.frame_index, field, people: moves });
    }
    let artifact = MotionArtifact { fixed_regions: regions.len(), frames: out };
    fsutil::write_json(&Stage::Motion.artifact(cache), &artifact)?;
    Ok(format!(
        "motion: {} frames, {} fixed regions, {} frames without a field",
        artifact.frames.len(),
        artifact.fixed_regions,
        no_field
    ))
}
