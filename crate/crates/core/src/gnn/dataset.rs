use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::actions::{Annotation, NUM_CLASSES};
use crate::graph::{self, GraphWindow, PlayerGraph, Timeline, WINDOW_SLOTS};
use crate::{Error, Result};

/// A window whose slots point into a shared frame table, so overlapping
/// windows do not copy (or recompute) the same frame graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub center_time_s: f64,
    /// Index into [`Dataset::frames`]; `None` for a missing or empty frame.
    pub slots: Vec<Option<u32>>,
    /// Class index, background last.
    pub label: usize,
    /// One pooled vector per late-fusion stream.
    pub fusion: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub frames: Vec<PlayerGraph>,
    pub windows: Vec<WindowSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Windows over a timeline; every non-empty frame graph is stored once.
    pub fn from_timeline(timeline: &Timeline, centers: &[f64], annotations: &[Annotation]) -> Self {
        let mut frames = Vec::new();
        let mut index: BTreeMap<u64, u32> = BTreeMap::new();
        let mut windows = Vec::with_capacity(centers.len());
        for &center in centers {
            let slots = (0..WINDOW_SLOTS)
                .map(|k| {
                    let g = timeline.get(graph::slot_time(center, k))?;
                    if g.is_empty() {
                        return None;
                    }
                    Some(*index.entry(g.timestamp_s.to_bits()).or_insert_with(|| {
                        frames.push(g.clone());
                        (frames.len() - 1) as u32
                    }))
                })
                .collect();
            let label = crate::actions::class_index(graph::window_label(center, annotations));
            windows.push(WindowSample { center_time_s: center, slots, label, fusion: Vec::new() });
        }
        Self { frames, windows }
    }

    /// Packs standalone windows, sharing frames that are identical.
    pub fn from_windows(windows: &[GraphWindow]) -> Self {
        let mut frames: Vec<PlayerGraph> = Vec::new();
        let mut by_time: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        let mut out = Vec::with_capacity(windows.len());
        for w in windows {
            let slots = w
                .slots
                .iter()
                .map(|g| {
                    if g.is_empty() {
                        return None;
                    }
                    let bucket = by_time.entry(g.timestamp_s.to_bits()).or_default();
                    if let Some(&i) = bucket.iter().find(|&&i| frames[i as usize] == *g) {
                        return Some(i);
                    }
                    frames.push(g.clone());
                    let i = (frames.len() - 1) as u32;
                    bucket.push(i);
                    Some(i)
                })
                .collect();
            out.push(WindowSample { center_time_s: w.center_time_s, slots, label: w.class_index(), fusion: Vec::new() });
        }
        Self { frames, windows: out }
    }

    /// The standalone form of window `i` (empty slots become zero-node graphs).
    pub fn window(&self, i: usize) -> GraphWindow {
        let w = &self.windows[i];
        let slots = w
            .slots
            .iter()
            .enumerate()
            .map(|(k, s)| match s {
                Some(f) => self.frames[*f as usize].clone(),
                None => PlayerGraph::empty(graph::slot_time(w.center_time_s, k)),
            })
            .collect();
        GraphWindow { center_time_s: w.center_time_s, slots, label: crate::actions::Action::from_index(w.label) }
    }

    pub fn classes(&self) -> BTreeSet<usize> {
        self.windows.iter().map(|w| w.label).collect()
    }

    pub fn validate(&self, fusion_dims: &[usize]) -> Result<()> {
        for f in &self.frames {
            f.validate()?;
        }
        for (i, w) in self.windows.iter().enumerate() {
            if w.slots.len() != WINDOW_SLOTS {
                return Err(Error::Validation(alloc::format!("window {i} has {} slots", w.slots.len())));
            }
            if w.label >= NUM_CLASSES {
                return Err(Error::Validation(alloc::format!("window {i} has label {}", w.label)));
            }
            if w.slots.iter().flatten().any(|&f| f as usize >= self.frames.len()) {
                return Err(Error::Validation(alloc::format!("window {i} points past the frame table")));
            }
            let dims: Vec<usize> = w.fusion.iter().map(Vec::len).collect();
            if dims != fusion_dims {
                return Err(Error::Shape(alloc::format!("window {i} fusion widths {dims:?}, model expects {fusion_dims:?}")));
            }
        }
        Ok(())
    }
}
