//! Per-frame player graphs and the 30-slot temporal windows fed to the network.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::actions::{self, Action, Annotation};
use crate::fmath;
use crate::geometry::PitchPoint;
use crate::ingest::FRAME_STEP_S;
use crate::motion::MotionVector;
use crate::{Error, Result};

pub const NODE_DIM: usize = 13;
pub const WINDOW_SLOTS: usize = 30;
pub const WINDOW_SPAN_S: f64 = WINDOW_SLOTS as f64 * FRAME_STEP_S;
const PROB_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    pub edge_threshold_m: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { edge_threshold_m: 5.0 }
    }
}

/// Node feature vector, in this order: 5 class probabilities, motion `(u, v)`,
/// bbox area over frame area, pitch position `(x, y)`, projected frame center
/// `(x, y)`, calibration confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeFeatures(pub [f64; NODE_DIM]);

impl NodeFeatures {
    pub fn class_probs(&self) -> &[f64] {
        &self.0[..5]
    }

    pub fn position(&self) -> PitchPoint {
        PitchPoint::new(self.0[8], self.0[9])
    }
}

pub fn build_node(
    probs: [f64; 5],
    motion: MotionVector,
    area_norm: f64,
    position: PitchPoint,
    frame_center: PitchPoint,
    calib: f64,
) -> Result<NodeFeatures> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Contract(alloc::format!("class probabilities {probs:?} do not sum to 1")));
    }
    if !(0.0..=1.0).contains(&calib) {
        return Err(Error::Contract(alloc::format!("calibration confidence {calib} outside [0, 1]")));
    }
    let f = [
        probs[0],
        probs[1],
        probs[2],
        probs[3],
        probs[4],
        motion.u,
        motion.v,
        area_norm,
        position.x,
        position.y,
        frame_center.x,
        frame_center.y,
        calib,
    ];
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("non-finite node feature".into()));
    }
    Ok(NodeFeatures(f))
}

/// Undirected edges `(i, j)`, `i < j`, between players at most `threshold_m`
/// apart.
pub fn build_edges(positions: &[PitchPoint], threshold_m: f64) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if positions[i].distance(&positions[j]) <= threshold_m {
                edges.push((i as u32, j as u32));
            }
        }
    }
    edges
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerGraph {
    pub timestamp_s: f64,
    pub nodes: Vec<NodeFeatures>,
    pub edges: Vec<(u32, u32)>,
}

impl PlayerGraph {
    pub fn empty(timestamp_s: f64) -> Self {
        Self { timestamp_s, nodes: Vec::new(), edges: Vec::new() }
    }

    pub fn from_nodes(timestamp_s: f64, nodes: Vec<NodeFeatures>, cfg: &GraphConfig) -> Self {
        let positions: Vec<PitchPoint> = nodes.iter().map(NodeFeatures::position).collect();
        let edges = build_edges(&positions, cfg.edge_threshold_m);
        Self { timestamp_s, nodes, edges }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len() as u32;
        for &(i, j) in &self.edges {
            if i >= j || j >= n {
                return Err(Error::Validation(alloc::format!("bad edge ({i}, {j}) in a graph of {n} nodes")));
            }
        }
        Ok(())
    }

    /// Neighbor lists with both directions of every edge.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = alloc::vec![Vec::new(); self.nodes.len()];
        for &(i, j) in &self.edges {
            adj[i as usize].push(j as usize);
            adj[j as usize].push(i as usize);
        }
        adj
    }
}

/// Frame graphs indexed by their 0.5 s time step.
#[derive(Debug, Clone, Default)]
pub struct Timeline {
    graphs: BTreeMap<i64, PlayerGraph>,
}

fn step_of(t: f64) -> i64 {
    fmath::round(t / FRAME_STEP_S) as i64
}

impl Timeline {
    pub fn new(graphs: impl IntoIterator<Item = PlayerGraph>) -> Self {
        Self { graphs: graphs.into_iter().map(|g| (step_of(g.timestamp_s), g)).collect() }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn get(&self, t: f64) -> Option<&PlayerGraph> {
        self.graphs.get(&step_of(t))
    }

    /// First and last timestamps.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.graphs.values().next()?.timestamp_s, self.graphs.values().next_back()?.timestamp_s))
    }

    pub fn graphs(&self) -> impl Iterator<Item = &PlayerGraph> {
        self.graphs.values()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphWindow {
    pub center_time_s: f64,
    /// Exactly [`WINDOW_SLOTS`] graphs at 0.5 s spacing; missing frames are
    /// zero-node graphs.
    pub slots: Vec<PlayerGraph>,
    pub label: Option<Action>,
}

impl GraphWindow {
    pub fn class_index(&self) -> usize {
        actions::class_index(self.label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.len() != WINDOW_SLOTS {
            return Err(Error::Validation(alloc::format!("window has {} slots, expected {WINDOW_SLOTS}", self.slots.len())));
        }
        self.slots.iter().try_for_each(PlayerGraph::validate)
    }
}

/// Start time of slot `k` for a window centered at `center`.
pub fn slot_time(center: f64, k: usize) -> f64 {
    center - 0.5 * WINDOW_SPAN_S + k as f64 * FRAME_STEP_S
}

/// Label of a window: the annotation inside `[center − 7.5, center + 7.5)`
/// nearest the center (the earlier one on an exact tie), else background.
pub fn window_label(center: f64, annotations: &[Annotation]) -> Option<Action> {
    let lo = center - 0.5 * WINDOW_SPAN_S;
    let hi = center + 0.5 * WINDOW_SPAN_S;
    let mut best: Option<(f64, f64, Action)> = None;
    for a in annotations.iter().filter(|a| a.time_s >= lo && a.time_s < hi) {
        let d = (a.time_s - center).abs();
        let better = match best {
            None => true,
            Some((bd, bt, _)) => d < bd || (d == bd && a.time_s < bt),
        };
        if better {
            best = Some((d, a.time_s, a.action));
        }
    }
    best.map(|b| b.2)
}

pub fn build_window(timeline: &Timeline, center: f64, annotations: &[Annotation]) -> GraphWindow {
    let slots = (0..WINDOW_SLOTS)
        .map(|k| {
            let t = slot_time(center, k);
            timeline.get(t).cloned().unwrap_or_else(|| PlayerGraph::empty(t))
        })
        .collect();
    GraphWindow { center_time_s: center, slots, label: window_label(center, annotations) }
}

/// Window centers every `stride_s` over the timeline's span.
pub fn window_centers(timeline: &Timeline, stride_s: f64) -> Vec<f64> {
    let Some((t0, t1)) = timeline.span() else { return Vec::new() };
    let n = fmath::floor((t1 - t0) / stride_s + 1e-9) as usize;
    (0..=n).map(|i| t0 + i as f64 * stride_s).collect()
}
