//! The single TOML configuration file. Every threshold has exactly one key
//! (`teamcluster.grow.lambda`, `filter.min_score`, ...); unknown keys are
//! rejected so that a typo cannot silently fall back to a default.

use std::path::{Path, PathBuf};

use pitchgraph_core::geometry::PitchTemplate;
use pitchgraph_core::gnn::{ModelConfig, TrainConfig};
use pitchgraph_core::graph::GraphConfig;
use pitchgraph_core::ingest::FilterConfig;
use pitchgraph_core::motion::MotionConfig;
use pitchgraph_core::spotting::SpottingConfig;
use pitchgraph_core::teamcluster::{ClassifierConfig, TeamClusterConfig};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::fsutil;

/// Input and cache locations. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub records: PathBuf,
    pub frames_dir: PathBuf,
    pub flows_dir: PathBuf,
    pub annotations: PathBuf,
    /// Ground-truth player classes, only used to report purity.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Global feature streams for late fusion.
    #[serde(default)]
    pub features: Vec<PathBuf>,
    pub cache_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColorConfig {
    pub erosion_radius: usize,
}

impl Default for ColorConfig {
    fn default() -> Self {
        Self { erosion_radius: pitchgraph_core::colorfeat::DEFAULT_EROSION_RADIUS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    /// Spacing of window centers for graphs and inference.
    pub stride_s: f64,
    /// Spacing of the windows used for training (a multiple of `stride_s`).
    pub train_stride_s: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { stride_s: 0.5, train_stride_s: 0.5 }
    }
}

/// Temporal train/test split. Without `test_from_s` the whole match is used
/// for training, inference and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub test_from_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub pitch: PitchTemplate,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub colorfeat: ColorConfig,
    #[serde(default)]
    pub teamcluster: TeamClusterConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub motion: MotionConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default)]
    pub windows: WindowConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub spotting: SpottingConfig,
}

impl PipelineConfig {
    /// Parses TOML; any key the schema does not know is an error.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let mut unknown = Vec::new();
        let cfg: Self = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !unknown.is_empty() {
            return Err(PipelineError::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fsutil::read_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for path in [&mut p.records, &mut p.frames_dir, &mut p.flows_dir, &mut p.annotations, &mut p.cache_dir]
            .into_iter()
            .chain(p.labels.as_mut())
            .chain(p.features.iter_mut())
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        PitchTemplate::new(self.pitch.length_m, self.pitch.width_m).map_err(|e| PipelineError::Config(e.to_string()))?;
        self.filter.validate().map_err(PipelineError::Config)?;
        self.motion.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.model.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.spotting.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if !self.model.fusion_dims.is_empty() {
            return bad("model.fusion_dims is derived from paths.features and must not be set".into());
        }
        if !(self.graph.edge_threshold_m >= 0.0) {
            return bad("graph.edge_threshold_m must be >= 0".into());
        }
        let w = self.windows;
        if !(w.stride_s > 0.0 && w.train_stride_s >= w.stride_s) {
            return bad("windows.stride_s must be positive and windows.train_stride_s at least as large".into());
        }
        if self.train.batch_size == 0 || self.classifier.batch_size == 0 {
            return bad("batch sizes must be positive".into());
        }
        if let Some(t) = self.split.test_from_s {
            if !t.is_finite() {
                return bad("split.test_from_s must be finite".into());
            }
        }
        Ok(())
    }
}
