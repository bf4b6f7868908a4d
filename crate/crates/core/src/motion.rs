//! Camera-compensated motion: fixed on-screen overlays, field segmentation and
//! the dominant flow of a masked region.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, KMeansConfig};
use crate::colorfeat;
use crate::fmath;
use crate::image::{self, BinaryMask, PixelRect, RgbImage};
use crate::ingest::FlowField;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    /// Fraction of the frames averaged for fixed-region detection.
    pub sample_fraction: f64,
    pub min_samples: usize,
    /// Mean-flow cluster centroids shorter than this (px/frame) are static.
    pub norm_eps: f64,
    pub min_region_px: usize,
    pub patch_threshold: f64,
    pub field_clusters: usize,
    /// RGB distance under which a color cluster is merged into the field.
    pub merge_eps: f64,
    pub opening_radius: usize,
    /// Components smaller than this fraction of the frame are dropped.
    pub min_component_frac: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            sample_fraction: 0.10,
            min_samples: 10,
            norm_eps: 0.5,
            min_region_px: 256,
            patch_threshold: 0.4,
            field_clusters: 5,
            merge_eps: 20.0,
            opening_radius: 2,
            min_component_frac: 0.01,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sample_fraction > 0.0
            && self.sample_fraction <= 1.0
            && self.norm_eps >= 0.0
            && (0.0..=1.0).contains(&self.patch_threshold)
            && self.field_clusters >= 1
            && self.merge_eps >= 0.0
            && (0.0..1.0).contains(&self.min_component_frac);
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("motion thresholds out of range".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionVector {
    pub u: f64,
    pub v: f64,
    pub magnitude: f64,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { u: 0.0, v: 0.0, magnitude: 0.0 };

    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v, magnitude: fmath::hypot(u, v) }
    }
}

/// A screen-static overlay such as a scoreboard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedRegion {
    pub mask: BinaryMask,
    pub rect: PixelRect,
    /// Mean colors over the sampled frames, `rect`-sized.
    pub mean_patch: RgbImage,
}

/// Indices of a uniform sample: `sample_fraction` of `n`, at least
/// `min_samples` (capped at `n`).
pub fn sample_indices(n: usize, cfg: &MotionConfig) -> Vec<usize> {
    let m = (fmath::ceil(n as f64 * cfg.sample_fraction) as usize).max(cfg.min_samples).min(n);
    (0..m).map(|i| i * n / m).collect()
}

/// Finds fixed regions from flows and the matching frames (same length, same
/// size).
pub fn detect_fixed_regions(flows: &[FlowField], frames: &[RgbImage], cfg: &MotionConfig, seed: u64) -> Result<Vec<FixedRegion>> {
    if flows.len() < cfg.min_samples {
        return Err(Error::InsufficientData(alloc::format!(
            "fixed-region detection needs {} sampled frames, got {}",
            cfg.min_samples,
            flows.len()
        )));
    }
    if flows.len() != frames.len() {
        return Err(Error::Shape(alloc::format!("{} flows but {} frames", flows.len(), frames.len())));
    }
    let (w, h) = (flows[0].width as usize, flows[0].height as usize);
    for (f, img) in flows.iter().zip(frames) {
        if f.width as usize != w || f.height as usize != h || img.width() != w || img.height() != h {
            return Err(Error::Shape("flows and frames must share one size".into()));
        }
    }
    let mut mean = vec![0.0; w * h * 2];
    for f in flows {
        for (m, uv) in mean.chunks_exact_mut(2).zip(&f.values) {
            m[0] += uv[0] as f64;
            m[1] += uv[1] as f64;
        }
    }
    let inv = 1.0 / flows.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);

    let k = 4.min(w * h);
    let km = kmeans(&mean, 2, k, seed, &KMeansConfig::default())?;
    let static_clusters: Vec<bool> = (0..k)
        .map(|c| {
            let cen = km.centroid(c);
            fmath::hypot(cen[0], cen[1]) < cfg.norm_eps
        })
        .collect();
    let mut fixed = BinaryMask::empty(w, h);
    for (i, &a) in km.assignments.iter().enumerate() {
        if static_clusters[a] {
            fixed.set(i % w, i / w, true);
        }
    }
    let mut regions = Vec::new();
    for comp in image::connected_components(&fixed) {
        if comp.count() < cfg.min_region_px {
            continue;
        }
        let rect = comp.bounding_rect().expect("component is non-empty");
        let mut acc = vec![[0.0f64; 3]; rect.area()];
        for img in frames {
            for y in rect.y0..rect.y1 {
                for x in rect.x0..rect.x1 {
                    let p = img.get(x, y);
                    let a = &mut acc[(y - rect.y0) * rect.width() + (x - rect.x0)];
                    for c in 0..3 {
                        a[c] += p[c] as f64;
                    }
                }
            }
        }
        let pixels = acc.iter().map(|a| a.map(|s| fmath::round(s * inv).clamp(0.0, 255.0) as u8)).collect();
        let mean_patch = RgbImage::new(rect.width(), rect.height(), pixels)?;
        regions.push(FixedRegion { mask: comp, rect, mean_patch });
    }
    Ok(regions)
}

const RGB_BINS: usize = 8;

/// Concatenated 8-bin R, G and B histograms of the masked pixels, normalized
/// to sum 1 overall. `pixel(x, y)` is in frame coordinates.
fn rgb_histogram(region: &FixedRegion, pixel: impl Fn(usize, usize) -> [u8; 3]) -> Option<[f64; 3 * RGB_BINS]> {
    let mut h = [0.0; 3 * RGB_BINS];
    let mut n = 0usize;
    let r = region.rect;
    for y in r.y0..r.y1 {
        for x in r.x0..r.x1 {
            if region.mask.get(x, y) {
                let p = pixel(x, y);
                for c in 0..3 {
                    h[c * RGB_BINS + p[c] as usize * RGB_BINS / 256] += 1.0;
                }
                n += 1;
            }
        }
    }
    if n == 0 {
        return None;
    }
    let total = 3.0 * n as f64;
    h.iter_mut().for_each(|v| *v /= total);
    Some(h)
}

/// Bhattacharyya distance between the frame's pixels under the region and the
/// region's mean patch; 1 when the frame does not cover the region.
pub fn fixed_region_distance(frame: &RgbImage, region: &FixedRegion) -> f64 {
    let r = region.rect;
    if frame.width() < r.x1 || frame.height() < r.y1 {
        return 1.0;
    }
    let reference = rgb_histogram(region, |x, y| region.mean_patch.get(x - r.x0, y - r.y0));
    let current = rgb_histogram(region, |x, y| frame.get(x, y));
    match (reference, current) {
        (Some(p), Some(q)) => colorfeat::bhattacharyya_unchecked(&p, &q),
        _ => 1.0,
    }
}

pub fn fixed_region_present(frame: &RgbImage, region: &FixedRegion, cfg: &MotionConfig) -> bool {
    fixed_region_distance(frame, region) < cfg.patch_threshold
}

/// Field mask of one frame. `excluded` holds the person and fixed-region pixels
/// (same size as the frame); they never belong to the field and do not take
/// part in the color clustering.
pub fn segment_field(frame: &RgbImage, excluded: &BinaryMask, cfg: &MotionConfig, seed: u64) -> Result<BinaryMask> {
    let (w, h) = (frame.width(), frame.height());
    if excluded.width() != w || excluded.height() != h {
        return Err(Error::Shape("exclusion mask and frame differ in size".into()));
    }
    let mut idx = Vec::new();
    let mut data = Vec::new();
    for (i, p) in frame.pixels().iter().enumerate() {
        if !excluded.bits()[i] {
            idx.push(i);
            data.extend(p.iter().map(|&c| c as f64));
        }
    }
    if idx.is_empty() {
        return Err(Error::EmptyField);
    }
    let k = cfg.field_clusters.min(idx.len());
    let km = kmeans(&data, 3, k, seed, &KMeansConfig::default())?;
    let sizes = km.cluster_sizes();
    // Color clusters closer than `merge_eps` are chained into groups first, so
    // a textured field split over several clusters still wins over a uniform
    // stand. The largest group is the field; an exact size tie goes to the
    // greener group.
    let mut group: Vec<usize> = (0..k).collect();
    for a in 0..k {
        for b in a + 1..k {
            if sizes[a] > 0 && sizes[b] > 0 && fmath::sqrt(crate::cluster::sq_dist(km.centroid(a), km.centroid(b))) < cfg.merge_eps {
                let (ga, gb) = (group[a], group[b]);
                for g in group.iter_mut().filter(|g| **g == gb) {
                    *g = ga;
                }
            }
        }
    }
    let group_size = |g: usize| (0..k).filter(|&c| group[c] == g).map(|c| sizes[c]).sum::<usize>();
    let greenness = |g: usize| {
        let (mut sum, mut n) = (0.0, 0usize);
        for c in (0..k).filter(|&c| group[c] == g) {
            let m = km.centroid(c);
            sum += (m[1] - 0.5 * (m[0] + m[2])) * sizes[c] as f64;
            n += sizes[c];
        }
        sum / n.max(1) as f64
    };
    let mut field = group[0];
    for g in (1..k).filter(|&c| group[c] == c) {
        let (sg, sf) = (group_size(g), group_size(field));
        if sg > sf || (sg == sf && greenness(g) > greenness(field)) {
            field = g;
        }
    }
    let merged: Vec<bool> = (0..k).map(|c| group[c] == field).collect();
    let mut raw = BinaryMask::empty(w, h);
    for (&i, &a) in idx.iter().zip(&km.assignments) {
        if merged[a] {
            raw.set(i % w, i / w, true);
        }
    }
    let opened = image::open(&raw, cfg.opening_radius);
    let min_px = fmath::ceil(cfg.min_component_frac * (w * h) as f64) as usize;
    let mut kept = BinaryMask::empty(w, h);
    for comp in image::connected_components(&opened) {
        if comp.count() >= min_px {
            kept.or_assign(&comp);
        }
    }
    if kept.count() == 0 {
        return Err(Error::EmptyField);
    }
    Ok(image::convex_hull_fill(&kept).and(&raw))
}

/// Dominant motion of the masked flow: magnitude and axis from the largest
/// eigenpair of the second-moment matrix, sign from the plurality quadrant of
/// the flow directions.
pub fn dominant_flow(flow: &FlowField, mask: &BinaryMask) -> Result<MotionVector> {
    if mask.width() != flow.width as usize || mask.height() != flow.height as usize {
        return Err(Error::Shape("mask and flow differ in size".into()));
    }
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    let mut quadrants = [0usize; 4];
    let mut n = 0usize;
    for (uv, &m) in flow.values.iter().zip(mask.bits()) {
        if !m {
            continue;
        }
        let (u, v) = (uv[0] as f64, uv[1] as f64);
        a += u * u;
        b += u * v;
        c += v * v;
        n += 1;
        if u != 0.0 || v != 0.0 {
            quadrants[quadrant(u, v)] += 1;
        }
    }
    if n == 0 {
        return Err(Error::Contract("dominant flow of an empty mask".into()));
    }
    let inv = 1.0 / n as f64;
    let (a, b, c) = (a * inv, b * inv, c * inv);
    let half_diff = 0.5 * (a - c);
    let lambda = 0.5 * (a + c) + fmath::sqrt(half_diff * half_diff + b * b);
    if !(lambda > 0.0) {
        return Ok(MotionVector::ZERO);
    }
    let e1 = (lambda - c, b);
    let e2 = (b, lambda - a);
    let (mut ex, mut ey) = if e1.0 * e1.0 + e1.1 * e1.1 >= e2.0 * e2.0 + e2.1 * e2.1 { e1 } else { e2 };
    let norm = fmath::hypot(ex, ey);
    if norm == 0.0 {
        // Isotropic: any axis is an eigenvector.
        (ex, ey) = if a >= c { (1.0, 0.0) } else { (0.0, 1.0) };
    } else {
        ex /= norm;
        ey /= norm;
    }

    let top = *quadrants.iter().max().unwrap();
    let winners: Vec<usize> = (0..4).filter(|&q| quadrants[q] == top).collect();
    let along = if top > 0 && winners.len() == 1 {
        let angle = (winners[0] as f64 + 0.5) * core::f64::consts::FRAC_PI_2;
        ex * fmath::cos(angle) + ey * fmath::sin(angle)
    } else {
        0.0
    };
    let flip = if along != 0.0 { along < 0.0 } else { ex < 0.0 || (ex == 0.0 && ey < 0.0) };
    if flip {
        ex = -ex;
        ey = -ey;
    }
    let mag = fmath::sqrt(lambda);
    Ok(MotionVector { u: mag * ex, v: mag * ey, magnitude: mag })
}

/// Direction quadrant of a nonzero vector, angles measured in `[0, 2π)`.
fn quadrant(u: f64, v: f64) -> usize {
    let mut angle = fmath::atan2(v, u);
    if angle < 0.0 {
        angle += 2.0 * core::f64::consts::PI;
    }
    ((angle / core::f64::consts::FRAC_PI_2) as usize).min(3)
}

/// Player motion relative to the camera-induced field motion.
pub fn player_motion(player: MotionVector, field: MotionVector) -> MotionVector {
    MotionVector::new(player.u - field.u, player.v - field.v)
}
