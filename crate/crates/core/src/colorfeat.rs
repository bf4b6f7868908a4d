//! Color features for person patches: CIE L\*a\*b\* conversion, mask erosion,
//! the 8×8 a\*b\* histogram and the bounded Bhattacharyya distance.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::image::{self, BinaryMask, RgbImage};
use crate::{Error, Result};

pub const AB_BINS: usize = 8;
pub const HIST_BINS: usize = AB_BINS * AB_BINS;
const AB_MIN: f64 = -128.0;
const AB_MAX: f64 = 127.0;
/// Sum tolerance accepted by [`bhattacharyya`].
pub const NORMALIZATION_TOL: f64 = 1e-6;

// sRGB primaries, D65 white.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        fmath::powf((c + 0.055) / 1.055, 2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        fmath::cbrt(t)
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// CIE 1976 L\*a\*b\* of an sRGB pixel under D65.
pub fn rgb_to_lab(rgb: [u8; 3]) -> (f64, f64, f64) {
    let lin = rgb.map(srgb_to_linear);
    let xyz: [f64; 3] = core::array::from_fn(|i| RGB_TO_XYZ[i].iter().zip(&lin).map(|(m, c)| m * c).sum());
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    (l, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// Erosion applied to person masks before histogramming, to drop boundary pixels
/// that mix jersey and background.
pub const DEFAULT_EROSION_RADIUS: usize = 1;

/// Square-element erosion of a mask; radius 0 returns the input.
pub fn erode_mask(mask: &BinaryMask, radius: usize) -> BinaryMask {
    image::erode(mask, radius)
}

/// Index of the a\* or b\* bin for a chroma value, uniform over `[-128, 127]`.
pub fn ab_bin(v: f64) -> usize {
    let t = (v - AB_MIN) * AB_BINS as f64 / (AB_MAX - AB_MIN);
    (fmath::floor(t).max(0.0) as usize).min(AB_BINS - 1)
}

/// L1-normalized 64-bin histogram over the a\*b\* plane, a\* major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram64 {
    #[serde(with = "bins_serde")]
    bins: [f64; HIST_BINS],
    pub support_px: u64,
}

impl Histogram64 {
    /// Normalizes raw counts; `None` when all counts are zero.
    pub fn from_counts(counts: &[f64; HIST_BINS], support_px: u64) -> Option<Self> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) || counts.iter().any(|&c| c < 0.0) {
            return None;
        }
        Some(Self { bins: counts.map(|c| c / total), support_px })
    }

    /// Wraps already-normalized bins; rejects negative entries or a sum off by
    /// more than [`NORMALIZATION_TOL`].
    pub fn try_from_bins(bins: [f64; HIST_BINS], support_px: u64) -> Result<Self> {
        check_normalized(&bins)?;
        Ok(Self { bins, support_px })
    }

    /// Single-bin histogram, handy for tests and synthetic data.
    pub fn one_hot(bin: usize) -> Self {
        let mut bins = [0.0; HIST_BINS];
        bins[bin] = 1.0;
        Self { bins, support_px: 1 }
    }

    pub fn bins(&self) -> &[f64; HIST_BINS] {
        &self.bins
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..HIST_BINS {
            if self.bins[i] > self.bins[best] {
                best = i;
            }
        }
        best
    }
}

fn check_normalized(bins: &[f64]) -> Result<()> {
    if bins.iter().any(|&b| !(b >= 0.0)) {
        return Err(Error::Contract("histogram has negative or NaN bins".into()));
    }
    let s: f64 = bins.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Contract(alloc::format!("histogram sums to {s}, expected 1")));
    }
    Ok(())
}

/// Histogram of a\*b\* over the true pixels of `mask`.
pub fn ab_histogram(image: &RgbImage, mask: &BinaryMask) -> Result<Histogram64> {
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(Error::Shape(alloc::format!(
            "image {}x{} vs mask {}x{}",
            image.width(),
            image.height(),
            mask.width(),
            mask.height()
        )));
    }
    let mut counts = [0.0; HIST_BINS];
    let mut support = 0u64;
    for (px, &on) in image.pixels().iter().zip(mask.bits()) {
        if on {
            let (_, a, b) = rgb_to_lab(*px);
            counts[ab_bin(a) * AB_BINS + ab_bin(b)] += 1.0;
            support += 1;
        }
    }
    Histogram64::from_counts(&counts, support).ok_or(Error::EmptySupport)
}

/// `sqrt(1 - BC)` for two histograms already known to be normalized.
///
/// Evaluated as `sqrt(½ Σ (√p − √q)²)`, which equals `sqrt(1 − Σ √(p q))` when
/// both sum to one but is exactly symmetric and exactly zero on identical
/// inputs.
pub fn bhattacharyya_unchecked(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let s: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let d = fmath::sqrt(a) - fmath::sqrt(b);
            d * d
        })
        .sum();
    fmath::sqrt((0.5 * s).clamp(0.0, 1.0))
}

/// Bounded Bhattacharyya distance between two normalized histograms of the same
/// length; fails if either sums away from one.
pub fn bhattacharyya_bins(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(alloc::format!("histogram lengths {} vs {}", p.len(), q.len())));
    }
    check_normalized(p)?;
    check_normalized(q)?;
    Ok(bhattacharyya_unchecked(p, q))
}

pub fn bhattacharyya(h1: &Histogram64, h2: &Histogram64) -> Result<f64> {
    bhattacharyya_bins(&h1.bins, &h2.bins)
}

/// Infallible distance for values whose type already guarantees normalization.
#[inline]
pub fn distance(h1: &Histogram64, h2: &Histogram64) -> f64 {
    bhattacharyya_unchecked(&h1.bins, &h2.bins)
}

/// Element-wise median histogram, renormalized. `None` for an empty input or an
/// all-zero median.
pub fn median_histogram<'a, I>(hists: I) -> Option<Histogram64>
where
    I: IntoIterator<Item = &'a Histogram64>,
{
    let hists: Vec<&Histogram64> = hists.into_iter().collect();
    if hists.is_empty() {
        return None;
    }
    let mut col = Vec::with_capacity(hists.len());
    let mut counts = [0.0; HIST_BINS];
    for (i, c) in counts.iter_mut().enumerate() {
        col.clear();
        col.extend(hists.iter().map(|h| h.bins[i]));
        *c = fmath::median(&mut col);
    }
    let support = hists.iter().map(|h| h.support_px).sum();
    Histogram64::from_counts(&counts, support)
}

/// Mean of histograms (stays on the simplex).
pub fn mean_histogram<'a, I>(hists: I) -> Option<Histogram64>
where
    I: IntoIterator<Item = &'a Histogram64>,
{
    let mut counts = [0.0; HIST_BINS];
    let mut support = 0;
    let mut n = 0usize;
    for h in hists {
        for (c, b) in counts.iter_mut().zip(&h.bins) {
            *c += b;
        }
        support += h.support_px;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    Histogram64::from_counts(&counts, support)
}

mod bins_serde {
    use super::HIST_BINS;
    use alloc::vec::Vec;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bins: &[f64; HIST_BINS], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(bins.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; HIST_BINS], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into().map_err(|v: Vec<f64>| D::Error::invalid_length(v.len(), &"64 histogram bins"))
    }
}
