//! JSON artifacts passed between stages.

use pitchgraph_core::colorfeat::Histogram64;
use pitchgraph_core::geometry::{GoalSide, PitchPoint};
use pitchgraph_core::gnn::TrainReport;
use pitchgraph_core::ingest::BBox;
use pitchgraph_core::motion::MotionVector;
use pitchgraph_core::teamcluster::{ClassifierReport, ClusterSet, PlayerClassifier, PurityReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonEntry {
    pub detection_id: u32,
    pub bbox: BBox,
    /// Box area over frame area.
    pub area_norm: f64,
    pub position: PitchPoint,
    pub hist: Histogram64,
}

/// One input frame. Frames dropped by the frame filter keep their slot in the
/// timeline (`kept = false`) but carry no people.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame_index: u32,
    pub timestamp_s: f64,
    pub kept: bool,
    pub calib_confidence: f64,
    /// Projection of the image center; `None` for dropped frames.
    pub frame_center: Option<PitchPoint>,
    pub people: Vec<PersonEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeopleArtifact {
    pub frames: Vec<FrameEntry>,
}

impl PeopleArtifact {
    pub fn kept(&self) -> impl Iterator<Item = &FrameEntry> {
        self.frames.iter().filter(|f| f.kept)
    }

    pub fn people_count(&self) -> usize {
        self.frames.iter().map(|f| f.people.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamsArtifact {
    pub clusters: ClusterSet,
    pub classifier: PlayerClassifier,
    pub report: ClassifierReport,
    pub midfield_frames: usize,
    pub midfield_samples: usize,
    pub keeper_candidates: usize,
    pub unlabeled_sides: Vec<GoalSide>,
    /// Only when ground-truth labels were configured.
    pub purity: Option<PurityReport>,
}

/// Motion of one kept frame; `people` follows the order of the frame's
/// [`PersonEntry`] list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMotion {
    pub frame_index: u32,
    /// Camera-induced field motion; `None` when no field was found.
    pub field: Option<MotionVector>,
    /// Player motion relative to the field.
    pub people: Vec<MotionVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionArtifact {
    pub fixed_regions: usize,
    pub frames: Vec<FrameMotion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArtifact {
    pub train_windows: usize,
    pub parameters: usize,
    /// Windows per class index.
    pub class_counts: Vec<usize>,
    pub report: TrainReport,
}
