//! The cached stage runner.
//!
//! Every stage reads its upstream artifacts from the cache directory, writes
//! its own atomically, and leaves a `<stage>.stamp` file holding the content
//! key it was computed from and its summary line. A stage whose key matches
//! its stamp is not recomputed, so changing a threshold only re-runs the
//! stages that depend on it.

mod artifacts;
mod ingest;
mod learn;
mod motion;
mod teams;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use artifacts::{FrameEntry, FrameMotion, MotionArtifact, PeopleArtifact, PersonEntry, TeamsArtifact, TrainArtifact};

use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::fsutil::{self, DirLock, KeyHasher};

/// Bumped whenever an artifact layout or a stage's semantics change.
const KEY_VERSION: &str = "pitchgraph-stage-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Teams,
    Motion,
    Graphs,
    Train,
    Spot,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 7] = [Stage::Ingest, Stage::Teams, Stage::Motion, Stage::Graphs, Stage::Train, Stage::Spot, Stage::Eval];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Teams => "teams",
            Stage::Motion => "motion",
            Stage::Graphs => "graphs",
            Stage::Train => "train",
            Stage::Spot => "spot",
            Stage::Eval => "eval",
        }
    }

    /// Files the stage writes into the cache directory; the first one is the
    /// artifact downstream stages read.
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &["people.json"],
            Stage::Teams => &["teams.json"],
            Stage::Motion => &["motion.json"],
            Stage::Graphs => &["graphs.pgw"],
            Stage::Train => &["model.pgck", "train.json"],
            Stage::Spot => &["predictions.csv"],
            Stage::Eval => &["eval.json", "eval.txt"],
        }
    }

    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Teams | Stage::Motion => &[Stage::Ingest],
            Stage::Graphs => &[Stage::Ingest, Stage::Teams, Stage::Motion],
            Stage::Train => &[Stage::Graphs],
            Stage::Spot => &[Stage::Graphs, Stage::Train],
            Stage::Eval => &[Stage::Spot],
        }
    }

    pub fn artifact(self, cache_dir: &Path) -> PathBuf {
        cache_dir.join(self.outputs()[0])
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: Stage,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
    /// True when the stamp matched and nothing was recomputed.
    pub cached: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Stamp {
    key: String,
    summary: String,
}

/// Runs one stage, or reuses its artifacts when nothing it depends on changed.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<StageOutcome> {
    let cache = &cfg.paths.cache_dir;
    for &up in stage.upstream() {
        let path = up.artifact(cache);
        if !path.is_file() {
            return Err(PipelineError::Dependency { stage: stage.name(), missing: up.name(), path });
        }
    }
    std::fs::create_dir_all(cache).map_err(PipelineError::io(cache))?;
    let _lock = DirLock::acquire(cache)?;

    let key = stage_key(stage, cfg)?;
    let artifacts: Vec<PathBuf> = stage.outputs().iter().map(|f| cache.join(f)).collect();
    let stamp_path = cache.join(format!("{}.stamp", stage.name()));
    if artifacts.iter().all(|p| p.is_file()) && stamp_path.is_file() {
        if let Ok(stamp) = fsutil::read_json::<Stamp>(&stamp_path) {
            if stamp.key == key {
                return Ok(StageOutcome { stage, artifacts, summary: stamp.summary, cached: true });
            }
        }
    }
    // A stale stamp must not survive a failed recomputation.
    if stamp_path.exists() {
        std::fs::remove_file(&stamp_path).map_err(PipelineError::io(&stamp_path))?;
    }
    let summary = match stage {
        Stage::Ingest => ingest::run(cfg)?,
        Stage::Teams => teams::run(cfg)?,
        Stage::Motion => motion::run(cfg)?,
        Stage::Graphs => learn::graphs(cfg)?,
        Stage::Train => learn::train(cfg)?,
        Stage::Spot => learn::spot(cfg)?,
        Stage::Eval => learn::eval(cfg)?,
    };
    fsutil::write_json(&stamp_path, &Stamp { key, summary: summary.clone() })?;
    Ok(StageOutcome { stage, artifacts, summary, cached: false })
}

/// Runs every stage in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<Vec<StageOutcome>> {
    Stage::ALL.into_iter().map(|s| run_stage(s, cfg)).collect()
}

/// Content key of a stage: its config subset, the seed where it matters, the
/// upstream artifacts and the raw inputs it reads.
fn stage_key(stage: Stage, cfg: &PipelineConfig) -> Result<String> {
    let mut h = KeyHasher::new(KEY_VERSION);
    h.bytes(stage.name().as_bytes());
    for &up in stage.upstream() {
        h.file(&up.artifact(&cfg.paths.cache_dir))?;
    }
    let p = &cfg.paths;
    match stage {
        Stage::Ingest => {
            h.json(&(&cfg.pitch, &cfg.filter, &cfg.colorfeat)).file(&p.records)?;
            hash_per_frame(&mut h, cfg, &p.frames_dir, crate::formats::frames::frame_path)?;
        }
        Stage::Teams => {
            h.json(&(&cfg.pitch, &cfg.teamcluster, &cfg.classifier, cfg.seed));
            if let Some(labels) = &p.labels {
                h.file(labels)?;
            }
        }
        Stage::Motion => {
            h.json(&(&cfg.motion, cfg.seed)).file(&p.records)?;
            hash_per_frame(&mut h, cfg, &p.frames_dir, crate::formats::frames::frame_path)?;
            hash_per_frame(&mut h, cfg, &p.flows_dir, crate::formats::frames::flow_path)?;
        }
        Stage::Graphs => {
            h.json(&(&cfg.graph, cfg.windows.stride_s)).file(&p.annotations)?;
            for f in &p.features {
                h.file(f)?;
            }
        }
        Stage::Train => {
            h.json(&(&cfg.model, &cfg.train, cfg.windows, cfg.split, cfg.seed));
        }
        Stage::Spot => {
            h.json(&(cfg.spotting.nms_window_s, cfg.split));
        }
        Stage::Eval => {
            h.json(&(&cfg.spotting.tolerances, cfg.split)).file(&p.annotations)?;
        }
    }
    Ok(h.hex())
}

/// Hashes the per-frame files named after the record indices; a missing file
/// hashes as absent (the stage itself reports it if it needs the file).
fn hash_per_frame(h: &mut KeyHasher, cfg: &PipelineConfig, dir: &Path, name: fn(&Path, u32) -> PathBuf) -> Result<()> {
    let records = crate::formats::records::load_frame_records(&cfg.paths.records)?;
    for r in &records {
        let path = name(dir, r.frame_index);
        if path.is_file() {
            h.file(&path)?;
        } else {
            h.bytes(b"absent");
        }
    }
    Ok(())
}
