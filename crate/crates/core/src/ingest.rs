//! Input data model (detections, frame records, flow fields, feature streams)
//! and the frame- and person-level filters applied before clustering.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::geometry::Homography;
use crate::image::{BinaryMask, PixelRect};
use crate::{Error, Result};

/// Sampling rate of every per-frame input.
pub const FPS: f64 = 2.0;
/// Spacing between consecutive frames, seconds.
pub const FRAME_STEP_S: f64 = 1.0 / FPS;
const TIMESTAMP_TOL: f64 = 1e-6;

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max && [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite())
    }

    /// Integer pixel rectangle covered by the box (floor of the min corner, ceil
    /// of the max corner). This is the frame that bbox-local masks live in.
    pub fn pixel_rect(&self) -> PixelRect {
        let x0 = fmath::floor(self.x_min).max(0.0) as usize;
        let y0 = fmath::floor(self.y_min).max(0.0) as usize;
        let x1 = (-fmath::floor(-self.x_max)).max(0.0) as usize;
        let y1 = (-fmath::floor(-self.y_max)).max(0.0) as usize;
        PixelRect { x0, y0, x1: x1.max(x0), y1: y1.max(y0) }
    }
}

/// Run-length encoded binary mask, row-major, alternating runs of zeros and
/// ones and always starting with a (possibly empty) run of zeros.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RleMask(pub Vec<u32>);

impl RleMask {
    pub fn total_len(&self) -> u64 {
        self.0.iter().map(|&r| r as u64).sum()
    }

    pub fn encode(bits: &[bool]) -> Self {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &b in bits {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        Self(runs)
    }

    pub fn decode(&self) -> Vec<bool> {
        let mut bits = Vec::with_capacity(self.total_len() as usize);
        let mut value = false;
        for &r in &self.0 {
            bits.extend(core::iter::repeat(value).take(r as usize));
            value = !value;
        }
        bits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: u32,
    pub bbox: BBox,
    pub score: f64,
    pub mask: RleMask,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !self.bbox.is_valid() {
            return Err(Error::Validation(format!("detection {}: degenerate bbox {:?}", self.id, self.bbox)));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Validation(format!("detection {}: score {} outside [0,1]", self.id, self.score)));
        }
        let area = self.bbox.pixel_rect().area() as u64;
        if self.mask.total_len() != area {
            return Err(Error::Validation(format!(
                "detection {}: mask runs sum to {}, bbox area is {}",
                self.id,
                self.mask.total_len(),
                area
            )));
        }
        Ok(())
    }

    /// The mask in its own bbox-local frame.
    pub fn local_mask(&self) -> BinaryMask {
        let rect = self.bbox.pixel_rect();
        BinaryMask::new(rect.width(), rect.height(), self.mask.decode())
            .unwrap_or_else(|_| BinaryMask::empty(rect.width(), rect.height()))
    }

    /// The mask pasted into a full `width × height` frame; out-of-frame pixels are clipped.
    pub fn full_mask(&self, width: usize, height: usize) -> BinaryMask {
        let rect = self.bbox.pixel_rect();
        let local = self.local_mask();
        let mut out = BinaryMask::empty(width, height);
        for ly in 0..local.height() {
            let y = rect.y0 + ly;
            if y >= height {
                break;
            }
            for lx in 0..local.width() {
                let x = rect.x0 + lx;
                if x < width && local.get(lx, ly) {
                    out.set(x, y, true);
                }
            }
        }
        out
    }
}

/// One frame's worth of upstream outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: u32,
    pub timestamp_s: f64,
    pub detections: Vec<Detection>,
    /// Maps image pixels to pitch meters.
    pub homography: Homography,
    pub calib_confidence: f64,
    pub frame_size: (u32, u32),
}

impl FrameRecord {
    pub fn frame_area(&self) -> f64 {
        self.frame_size.0 as f64 * self.frame_size.1 as f64
    }

    /// Checks every per-frame invariant (not the inter-frame timestamp spacing).
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.calib_confidence) {
            return Err(Error::Validation(format!(
                "frame {}: calib_confidence {} outside [0,1]",
                self.frame_index, self.calib_confidence
            )));
        }
        if self.calib_confidence > 0.0 && self.homography.determinant().abs() <= 1e-9 {
            return Err(Error::Validation(format!("frame {}: homography is singular", self.frame_index)));
        }
        if self.frame_size.0 == 0 || self.frame_size.1 == 0 {
            return Err(Error::Validation(format!("frame {}: empty frame size", self.frame_index)));
        }
        if !self.timestamp_s.is_finite() {
            return Err(Error::Validation(format!("frame {}: non-finite timestamp", self.frame_index)));
        }
        for d in &self.detections {
            d.validate().map_err(|e| match e {
                Error::Validation(m) => Error::Validation(format!("frame {}: {}", self.frame_index, m)),
                other => other,
            })?;
        }
        Ok(())
    }
}

/// Sorts by frame index and validates every record plus the 2 fps spacing.
pub fn validate_sequence(records: &mut [FrameRecord]) -> Result<()> {
    records.sort_by_key(|r| r.frame_index);
    for r in records.iter() {
        r.validate()?;
    }
    for pair in records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.frame_index == b.frame_index {
            return Err(Error::Validation(format!("duplicate frame index {}", a.frame_index)));
        }
        let expected = (b.frame_index - a.frame_index) as f64 * FRAME_STEP_S;
        let dt = b.timestamp_s - a.timestamp_s;
        if dt <= 0.0 || (dt - expected).abs() > TIMESTAMP_TOL {
            return Err(Error::Validation(format!(
                "frames {} -> {}: timestamp step {} s, expected {} s",
                a.frame_index, b.frame_index, dt, expected
            )));
        }
    }
    Ok(())
}

/// Dense optical flow, px/frame, row-major `(u, v)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: u32,
    pub height: u32,
    pub values: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn new(width: u32, height: u32, values: Vec<[f32; 2]>) -> Result<Self> {
        let f = Self { width, height, values };
        f.validate()?;
        Ok(f)
    }

    pub fn uniform(width: u32, height: u32, uv: [f32; 2]) -> Self {
        Self { width, height, values: vec![uv; width as usize * height as usize] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.width as usize * self.height as usize {
            return Err(Error::Validation(format!(
                "flow {}x{} has {} values",
                self.width,
                self.height,
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::Validation("flow contains non-finite components".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let v = self.values[y * self.width as usize + x];
        (v[0] as f64, v[1] as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Rgb,
    Audio,
}

impl Modality {
    pub fn name(&self) -> &'static str {
        match self {
            Modality::Rgb => "rgb",
            Modality::Audio => "audio",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rgb" => Some(Modality::Rgb),
            "audio" => Some(Modality::Audio),
            _ => None,
        }
    }
}

/// Per-timestep global feature vectors (one per frame at 2 fps).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStream {
    pub modality: Modality,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl FeatureStream {
    pub fn validate(&self) -> Result<()> {
        if let Some((i, v)) = self.vectors.iter().enumerate().find(|(_, v)| v.len() != self.dim) {
            return Err(Error::Validation(format!(
                "{} stream: vector {} has length {}, expected {}",
                self.modality.name(),
                i,
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn check_alignment(&self, frame_count: usize) -> Result<()> {
        if self.vectors.len().abs_diff(frame_count) > 1 {
            return Err(Error::Validation(format!(
                "{} stream has {} timesteps for {} frames",
                self.modality.name(),
                self.vectors.len(),
                frame_count
            )));
        }
        Ok(())
    }

    /// Mean of the vectors whose timestamps fall in `[start_s, end_s)`; zeros
    /// when none do.
    pub fn mean_over(&self, start_s: f64, end_s: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        let mut n = 0usize;
        for (i, v) in self.vectors.iter().enumerate() {
            let t = i as f64 * FRAME_STEP_S;
            if t >= start_s - TIMESTAMP_TOL && t < end_s - TIMESTAMP_TOL {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
                n += 1;
            }
        }
        if n > 0 {
            for a in &mut acc {
                *a /= n as f64;
            }
        }
        acc
    }
}

/// Thresholds for dropping frames and people before clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Frames with calibration confidence at or below this are dropped.
    pub calib_threshold: f64,
    /// A frame is a close-up when any bbox exceeds this fraction of the frame area.
    pub closeup_frac: f64,
    pub min_score: f64,
    pub min_area_px: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { calib_threshold: 0.85, closeup_frac: 0.10, min_score: 0.80, min_area_px: 500.0 }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.calib_threshold) {
            return Err("filter.calib_threshold must be in [0,1]".into());
        }
        if !(self.closeup_frac > 0.0 && self.closeup_frac <= 1.0) {
            return Err("filter.closeup_frac must be in (0,1]".into());
        }
        if !(0.0..=1.0).contains(&self.min_score) {
            return Err("filter.min_score must be in [0,1]".into());
        }
        if !(self.min_area_px >= 0.0) {
            return Err("filter.min_area_px must be >= 0".into());
        }
        Ok(())
    }

    pub fn keeps_frame(&self, frame: &FrameRecord) -> bool {
        if frame.calib_confidence <= self.calib_threshold {
            return false;
        }
        let limit = self.closeup_frac * frame.frame_area();
        frame.detections.iter().all(|d| d.bbox.area() <= limit)
    }

    pub fn keeps_detection(&self, det: &Detection) -> bool {
        det.score >= self.min_score && det.bbox.area() >= self.min_area_px
    }
}

/// Drops low-confidence calibrations and close-up frames, preserving order.
pub fn filter_frames(records: &[FrameRecord], cfg: &FilterConfig) -> Vec<FrameRecord> {
    records.iter().filter(|r| cfg.keeps_frame(r)).cloned().collect()
}

/// Keeps confident, large-enough detections in their original order.
pub fn filter_detections(frame: &FrameRecord, cfg: &FilterConfig) -> Vec<Detection> {
    frame.detections.iter().filter(|d| cfg.keeps_detection(d)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(id: u32, bbox: BBox, score: f64) -> Detection {
        let area = bbox.pixel_rect().area();
        Detection { id, bbox, score, mask: RleMask(vec![0, area as u32]) }
    }

    fn frame(calib: f64, dets: Vec<Detection>) -> FrameRecord {
        FrameRecord {
            frame_index: 0,
            timestamp_s: 0.0,
            detections: dets,
            homography: Homography::identity(),
            calib_confidence: calib,
            frame_size: (100, 100),
        }
    }

    #[test]
    fn calibration_boundary_is_inclusive() {
        let cfg = FilterConfig::default();
        let small = det(1, BBox::new(0.0, 0.0, 10.0, 10.0), 0.9);
        assert!(filter_frames(&[frame(0.85, vec![small.clone()])], &cfg).is_empty());
        assert_eq!(filter_frames(&[frame(0.86, vec![small])], &cfg).len(), 1);
    }

    #[test]
    fn closeup_frame_dropped() {
        let cfg = FilterConfig { closeup_frac: 0.10, ..Default::default() };
        // 15% of a 100x100 frame.
        let big = det(1, BBox::new(0.0, 0.0, 30.0, 50.0), 0.9);
        assert!(filter_frames(&[frame(0.95, vec![big])], &cfg).is_empty());
    }

    #[test]
    fn detection_thresholds() {
        let cfg = FilterConfig { min_score: 0.80, min_area_px: 500.0, ..Default::default() };
        let low = det(1, BBox::new(0.0, 0.0, 30.0, 30.0), 0.79);
        let tiny = det(2, BBox::new(0.0, 0.0, 20.0, 20.0), 0.95);
        let ok_a = det(3, BBox::new(0.0, 0.0, 30.0, 30.0), 0.80);
        let ok_b = det(4, BBox::new(5.0, 5.0, 40.0, 40.0), 0.99);
        let f = frame(0.9, vec![low, tiny, ok_a.clone(), ok_b.clone()]);
        assert_eq!(filter_detections(&f, &cfg), vec![ok_a.clone(), ok_b.clone()]);
        let all = frame(0.9, vec![ok_a, ok_b]);
        assert_eq!(filter_detections(&all, &cfg), all.detections);
    }

    #[test]
    fn rle_validation() {
        let mut d = det(1, BBox::new(0.0, 0.0, 4.0, 2.0), 0.9);
        assert!(d.validate().is_ok());
        d.mask = RleMask(vec![3, 4]);
        assert!(matches!(d.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn full_mask_pastes_at_bbox() {
        let bits = [false, true, true, false];
        let d = Detection { id: 0, bbox: BBox::new(2.0, 1.0, 4.0, 3.0), score: 1.0, mask: RleMask::encode(&bits) };
        let m = d.full_mask(5, 4);
        assert_eq!(m.count(), 2);
        assert!(m.get(3, 1) && m.get(2, 2));
    }

    #[test]
    fn singular_homography_rejected_only_when_calibrated() {
        let mut f = frame(0.9, vec![]);
        f.homography = Homography::from_rows([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(f.validate().is_err());
        f.calib_confidence = 0.0;
        assert!(f.validate().is_ok());
    }

    #[test]
    fn sequence_spacing_checked() {
        let mut a = frame(0.9, vec![]);
        let mut b = a.clone();
        b.frame_index = 2;
        b.timestamp_s = 1.0;
        let mut seq = vec![b.clone(), a.clone()];
        validate_sequence(&mut seq).unwrap();
        assert_eq!(seq[0].frame_index, 0);
        a.timestamp_s = 0.1;
        assert!(validate_sequence(&mut [a, b]).is_err());
    }

    #[test]
    fn feature_window_mean() {
        let s = FeatureStream { modality: Modality::Audio, dim: 1, vectors: (0..10).map(|i| vec![i as f64]).collect() };
        // timestamps 0.0 .. 4.5; [1.0, 2.0) covers indices 2 and 3.
        assert_eq!(s.mean_over(1.0, 2.0), vec![2.5]);
        assert_eq!(s.mean_over(100.0, 200.0), vec![0.0]);
        assert!(s.check_alignment(11).is_ok());
        assert!(s.check_alignment(12).is_err());
    }

    fn arb_frame() -> impl Strategy<Value = FrameRecord> {
        (0.0f64..1.0, proptest::collection::vec((0.0f64..90.0, 0.0f64..90.0, 1.0f64..40.0, 1.0f64..40.0, 0.0f64..1.0), 0..6)).prop_map(
            |(calib, boxes)| {
                let dets = boxes
                    .into_iter()
                    .enumerate()
                    .map(|(i, (x, y, w, h, s))| det(i as u32, BBox::new(x, y, x + w, y + h), s))
                    .collect();
                frame(calib, dets)
            },
        )
    }

    proptest! {
        #[test]
        fn filters_are_idempotent_subsequences(frames in proptest::collection::vec(arb_frame(), 0..12)) {
            let cfg = FilterConfig::default();
            let once = filter_frames(&frames, &cfg);
            prop_assert_eq!(&filter_frames(&once, &cfg), &once);
            // subsequence check
            let mut it = frames.iter();
            for kept in &once {
                prop_assert!(it.any(|f| f == kept));
            }
            for f in &frames {
                let d1 = filter_detections(f, &cfg);
                let mut g = f.clone();
                g.detections = d1.clone();
                prop_assert_eq!(filter_detections(&g, &cfg), d1);
            }
        }

        #[test]
        fn rle_roundtrip(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            let rle = RleMask::encode(&bits);
            prop_assert_eq!(rle.decode(), bits.clone());
            prop_assert_eq!(rle.total_len() as usize, bits.len());
        }
    }
}
