//! Minimal raster types: RGB frames and binary masks, plus the morphology and
//! region tools needed by histogram extraction and field segmentation.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Shape(alloc::format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![color; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        self.pixels[y * self.width + x] = c;
    }

    /// Copy of the pixels inside `rect`; `rect` must lie inside the image.
    pub fn crop(&self, rect: PixelRect) -> Self {
        let mut out = Vec::with_capacity(rect.width() * rect.height());
        for y in rect.y0..rect.y1 {
            out.extend_from_slice(&self.pixels[y * self.width + rect.x0..y * self.width + rect.x1]);
        }
        Self { width: rect.width(), height: rect.height(), pixels: out }
    }
}

/// Half-open integer rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }
}

/// Row-major binary image.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Shape(alloc::format!(
                "{}x{} mask needs {} values, got {}",
                width,
                height,
                width * height,
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![true; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn and(&self, other: &Self) -> Self {
        debug_assert!(self.same_shape(other));
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect();
        Self { width: self.width, height: self.height, bits }
    }

    pub fn or_assign(&mut self, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    pub fn not(&self) -> Self {
        Self { width: self.width, height: self.height, bits: self.bits.iter().map(|b| !b).collect() }
    }

    /// Tight bounding rectangle of the true pixels, `None` when empty.
    pub fn bounding_rect(&self) -> Option<PixelRect> {
        let mut rect: Option<PixelRect> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let r = rect.get_or_insert(PixelRect { x0: x, y0: y, x1: x + 1, y1: y + 1 });
                    r.x0 = r.x0.min(x);
                    r.y0 = r.y0.min(y);
                    r.x1 = r.x1.max(x + 1);
                    r.y1 = r.y1.max(y + 1);
                }
            }
        }
        rect
    }

    /// Intersection over union of two same-shape masks; 1 when both are empty.
    pub fn iou(&self, other: &Self) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&a, &b) in self.bits.iter().zip(&other.bits) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Separable square min/max filter; pixels beyond the border count as `outside`.
fn square_filter(mask: &BinaryMask, radius: usize, want: bool, outside: bool) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width, mask.height);
    let r = radius as isize;
    // For erosion (want = false) a pixel stays true only if no false pixel is in
    // the window; dilation is the dual.
    let pass = |src: &[bool], horizontal: bool| -> Vec<bool> {
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut hit = false;
                for d in -r..=r {
                    let (xx, yy) = if horizontal { (x as isize + d, y as isize) } else { (x as isize, y as isize + d) };
                    let v = if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                        outside
                    } else {
                        src[yy as usize * w + xx as usize]
                    };
                    if v == want {
                        hit = true;
                        break;
                    }
                }
                out[y * w + x] = if hit { want } else { !want };
            }
        }
        out
    };
    let tmp = pass(&mask.bits, true);
    let bits = pass(&tmp, false);
    BinaryMask { width: w, height: h, bits }
}

/// Erosion with a `(2r+1)×(2r+1)` square; pixels outside the image are false.
pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    square_filter(mask, radius, false, false)
}

/// Dilation with a `(2r+1)×(2r+1)` square.
pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    square_filter(mask, radius, true, false)
}

/// Morphological opening (erosion followed by dilation).
pub fn open(mask: &BinaryMask, radius: usize) -> BinaryMask {
    dilate(&erode(mask, radius), radius)
}

/// 4-connected components of the true pixels, each returned as a full-size mask.
pub fn connected_components(mask: &BinaryMask) -> Vec<BinaryMask> {
    let (w, h) = (mask.width, mask.height);
    let mut label = vec![usize::MAX; w * h];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut comp = BinaryMask::empty(w, h);
        label[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            comp.bits[p] = true;
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if mask.bits[q] && label[q] == usize::MAX {
                    label[q] = id;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        comps.push(comp);
    }
    comps
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull of the true pixels' centers, rasterized back to a mask.
///
/// A pixel is inside when its center lies in the closed hull polygon, so the
/// result always contains the input.
pub fn convex_hull_fill(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    // Only the leftmost and rightmost pixel of each row can be hull vertices.
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for y in 0..h {
        let row = &mask.bits[y * w..(y + 1) * w];
        if let Some(first) = row.iter().position(|&b| b) {
            let last = row.iter().rposition(|&b| b).unwrap_or(first);
            pts.push((first as f64, y as f64));
            if last != first {
                pts.push((last as f64, y as f64));
            }
        }
    }
    let mut out = BinaryMask::empty(w, h);
    if pts.is_empty() {
        return out;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        // Segment or point: fill the pixels along the span.
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs())) as usize;
        for s in 0..=steps {
            let t = if steps == 0 { 0.0 } else { s as f64 / steps as f64 };
            let x = crate::fmath::round(a.0 + t * (b.0 - a.0)) as usize;
            let y = crate::fmath::round(a.1 + t * (b.1 - a.1)) as usize;
            out.set(x, y, true);
        }
        return out;
    }
    // Andrew's monotone chain, counter-clockwise.
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        for &(x, y) in &pts {
            out.set(x as usize, y as usize, true);
        }
        return out;
    }
    let n = hull.len();
    for y in 0..h {
        for x in 0..w {
            let p = (x as f64, y as f64);
            let inside = (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= -1e-9);
            if inside {
                out.set(x, y, true);
            }
        }
    }
    out
}
