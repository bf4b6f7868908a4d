//! The spotting network: four dynamic edge-convolution blocks per frame graph,
//! a mean readout per frame, two NetVLAD poolings over the first and second
//! half of the window, and a linear head over the 17 actions plus background.

mod dataset;
mod forward;
mod synthetic;
mod train;

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dataset::{Dataset, WindowSample};
pub use forward::{edge_conv_block, forward_logits, knn_edges, loss_and_grad, physical_edges, predict_probs, EdgeList};
pub use synthetic::separable_windows;
pub use train::{accuracy, train, train_from, TrainConfig, TrainReport};

use crate::actions::NUM_CLASSES;
use crate::autodiff::Tensor;
use crate::graph::{NODE_DIM, WINDOW_SLOTS};
use crate::{Error, Result};

/// Graph block family. Only the dynamic edge convolution is implemented; the
/// enum is the seam for alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    DynamicEdgeConv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub block: BlockKind,
    pub node_dim: usize,
    pub hidden: usize,
    pub blocks: usize,
    /// Neighbors per node in the feature-space blocks.
    pub k_dyn: usize,
    pub vlad_clusters: usize,
    pub leaky_slope: f64,
    /// Width of each late-fusion stream (empty: graph only).
    pub fusion_dims: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            block: BlockKind::DynamicEdgeConv,
            node_dim: NODE_DIM,
            hidden: 64,
            blocks: 4,
            k_dyn: 5,
            vlad_clusters: 64,
            leaky_slope: 0.2,
            fusion_dims: Vec::new(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_dim == 0 || self.hidden == 0 || self.blocks == 0 || self.vlad_clusters == 0 {
            return Err(Error::Validation("network widths, block count and vocabulary size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::Validation("leaky slope must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Width of the head's input.
    pub fn head_inputs(&self) -> usize {
        2 * self.vlad_clusters * self.hidden + self.fusion_dims.iter().sum::<usize>()
    }

    /// Tensor names and shapes, in parameter order.
    pub fn layout(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        for b in 0..self.blocks {
            let d_in = if b == 0 { self.node_dim } else { self.hidden };
            out.push((alloc::format!("block{b}.w1"), self.hidden, 2 * d_in));
            out.push((alloc::format!("block{b}.b1"), 1, self.hidden));
            out.push((alloc::format!("block{b}.w2"), self.hidden, self.hidden));
            out.push((alloc::format!("block{b}.b2"), 1, self.hidden));
        }
        for v in ["vlad_before", "vlad_after"] {
            out.push((alloc::format!("{v}.w"), self.vlad_clusters, self.hidden));
            out.push((alloc::format!("{v}.b"), 1, self.vlad_clusters));
            out.push((alloc::format!("{v}.centers"), self.vlad_clusters, self.hidden));
        }
        out.push(("head.w".into(), NUM_CLASSES, self.head_inputs()));
        out.push(("head.b".into(), 1, NUM_CLASSES));
        out
    }

    /// Index of the first head tensor; everything before it is backbone.
    pub fn head_start(&self) -> usize {
        4 * self.blocks + 6
    }
}

pub(crate) const SLOTS_PER_HALF: usize = WINDOW_SLOTS / 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let tensors = config.layout().into_iter().map(|(_, r, c)| Tensor::zeros(r, c)).collect();
        Ok(Self { config, tensors })
    }

    /// Glorot-uniform weights, zero biases, small uniform NetVLAD centers.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = p.config.layout();
        for (t, (name, rows, cols)) in p.tensors.iter_mut().zip(&layout) {
            if name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2") {
                continue;
            }
            let bound = if name.ends_with(".centers") { 0.1 } else { crate::fmath::sqrt(6.0 / (rows + cols) as f64) };
            t.data.iter_mut().for_each(|v| *v = rng.gen_range(-bound..bound));
        }
        Ok(p)
    }

    pub fn names(&self) -> Vec<String> {
        self.config.layout().into_iter().map(|(n, _, _)| n).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.tensors.iter().map(Tensor::len).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let layout = self.config.layout();
        if layout.len() != self.tensors.len() {
            return Err(Error::Shape(alloc::format!("expected {} tensors, got {}", layout.len(), self.tensors.len())));
        }
        for ((name, r, c), t) in layout.iter().zip(&self.tensors) {
            if t.rows != *r || t.cols != *c || t.data.len() != r * c {
                return Err(Error::Shape(alloc::format!("{name} is {}x{}, expected {r}x{c}", t.rows, t.cols)));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(alloc::format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }

    /// Named tensors plus `meta.*` entries describing the configuration, for
    /// checkpoints.
    pub fn to_named_tensors(&self) -> Vec<(String, Tensor)> {
        let c = &self.config;
        let meta = |name: &str, vals: Vec<f64>| (String::from(name), Tensor::row_vector(vals));
        let mut out = alloc::vec![
            meta("meta.node_dim", alloc::vec![c.node_dim as f64]),
            meta("meta.hidden", alloc::vec![c.hidden as f64]),
            meta("meta.blocks", alloc::vec![c.blocks as f64]),
            meta("meta.k_dyn", alloc::vec![c.k_dyn as f64]),
            meta("meta.vlad_clusters", alloc::vec![c.vlad_clusters as f64]),
            meta("meta.leaky_slope", alloc::vec![c.leaky_slope]),
            meta("meta.fusion_dims", c.fusion_dims.iter().map(|&d| d as f64).collect()),
        ];
        out.extend(self.names().into_iter().zip(self.tensors.iter().cloned()));
        out
    }

    pub fn from_named_tensors(named: Vec<(String, Tensor)>) -> Result<Self> {
        let find = |key: &str| named.iter().find(|(n, _)| n == key).map(|(_, t)| t);
        let scalar = |key: &str| -> Result<f64> {
            find(key)
                .and_then(|t| t.data.first().copied())
                .ok_or_else(|| Error::Validation(alloc::format!("checkpoint lacks {key}")))
        };
        let count = |key: &str| -> Result<usize> {
            let v = scalar(key)?;
            if v < 0.0 || crate::fmath::floor(v) != v {
                return Err(Error::Validation(alloc::format!("{key} = {v} is not a count")));
            }
            Ok(v as usize)
        };
        let config = ModelConfig {
            block: BlockKind::DynamicEdgeConv,
            node_dim: count("meta.node_dim")?,
            hidden: count("meta.hidden")?,
            blocks: count("meta.blocks")?,
            k_dyn: count("meta.k_dyn")?,
            vlad_clusters: count("meta.vlad_clusters")?,
            leaky_slope: scalar("meta.leaky_slope")?,
            fusion_dims: find("meta.fusion_dims").map(|t| t.data.iter().map(|&d| d as usize).collect()).unwrap_or_default(),
        };
        let mut tensors = Vec::new();
        for (name, _, _) in config.layout() {
            let t = find(&name).ok_or_else(|| Error::Validation(alloc::format!("checkpoint lacks tensor {name}")))?;
            tensors.push(t.clone());
        }
        let p = Self { config, tensors };
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_matches_declared_shapes() {
        let p = ModelParams::init(ModelConfig::default(), 0).unwrap();
        p.validate().unwrap();
        let names = p.names();
        assert_eq!(names[0], "block0.w1");
        assert_eq!((p.tensors[0].rows, p.tensors[0].cols), (64, 26));
        assert_eq!((p.tensors[4].rows, p.tensors[4].cols), (64, 128));
        let head = p.config.head_start();
        assert_eq!(names[head], "head.w");
        assert_eq!((p.tensors[head].rows, p.tensors[head].cols), (18, 2 * 64 * 64));
    }

    #[test]
    fn named_tensors_round_trip() {
        let cfg = ModelConfig { hidden: 8, vlad_clusters: 3, fusion_dims: alloc::vec![4, 2], ..Default::default() };
        let p = ModelParams::init(cfg, 5).unwrap();
        let q = ModelParams::from_named_tensors(p.to_named_tensors()).unwrap();
        assert_eq!(p, q);
        let mut broken = p.to_named_tensors();
        broken.retain(|(n, _)| n != "head.b");
        assert!(ModelParams::from_named_tensors(broken).is_err());
    }
}
