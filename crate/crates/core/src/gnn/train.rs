use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{forward_logits, loss_and_grad, Dataset, ModelConfig, ModelParams};
use crate::optim::{Adam, AdamConfig, Plateau};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub min_lr: f64,
    /// Update only the head (late fusion on a trained backbone).
    pub freeze_backbone: bool,
    /// Stop once training accuracy (percent) reaches this value.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 96,
            patience: 7,
            max_epochs: 100,
            min_lr: 1e-6,
            freeze_backbone: false,
            target_accuracy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    /// Mean batch loss per epoch.
    pub loss: Vec<f64>,
    pub lr_drops: Vec<usize>,
    pub final_lr: f64,
    pub train_accuracy: f64,
}

/// Fraction (percent) of windows whose arg-max class is the label.
pub fn accuracy(params: &ModelParams, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let idx: Vec<usize> = (0..ds.len()).collect();
    let mut hits = 0;
    for chunk in idx.chunks(96) {
        for (row, &i) in forward_logits(params, ds, chunk)?.iter().zip(chunk) {
            let best = (0..row.len()).fold(0, |b, k| if row[k] > row[b] { k } else { b });
            hits += (best == ds.windows[i].label) as usize;
        }
    }
    Ok(100.0 * hits as f64 / ds.len() as f64)
}

/// Trains a freshly initialized network.
pub fn train(ds: &Dataset, model: ModelConfig, cfg: &TrainConfig, seed: u64) -> Result<(ModelParams, TrainReport)> {
    let init = ModelParams::init(model, seed)?;
    train_from(init, ds, cfg, seed)
}

/// Continues training from `params`.
pub fn train_from(mut params: ModelParams, ds: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<(ModelParams, TrainReport)> {
    params.validate()?;
    ds.validate(&params.config.fusion_dims)?;
    if ds.classes().len() < 2 {
        return Err(Error::Training("training windows cover fewer than two classes".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Validation("batch size must be positive".into()));
    }
    let head = params.config.head_start();
    let mut opt = Adam::new(cfg.adam, &params.sizes());
    let mut plateau = Plateau::new(cfg.patience);
    let mut lr = cfg.adam.lr;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7f4a_7c15);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut report = TrainReport { epochs: 0, loss: Vec::new(), lr_drops: Vec::new(), final_lr: lr, train_accuracy: 0.0 };
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = loss_and_grad(&params, ds, batch)?;
            total += loss * batch.len() as f64;
            let g: Vec<Option<&[f64]>> =
                grads.iter().enumerate().map(|(k, t)| (!cfg.freeze_backbone || k >= head).then_some(t.data.as_slice())).collect();
            let mut p: Vec<&mut [f64]> = params.tensors.iter_mut().map(|t| t.data.as_mut_slice()).collect();
            opt.step(lr, &mut p, &g);
        }
        let mean = total / ds.len() as f64;
        report.loss.push(mean);
        report.epochs = epoch + 1;
        let next = plateau.step(mean, lr);
        if next < lr {
            report.lr_drops.push(epoch + 1);
        }
        lr = next;
        if lr < cfg.min_lr {
            break;
        }
        if let Some(target) = cfg.target_accuracy {
            if accuracy(&params, ds)? >= target {
                break;
            }
        }
    }
    params.validate().map_err(|e| Error::Training(alloc::format!("parameters diverged: {e}")))?;
    report.final_lr = lr;
    report.train_accuracy = accuracy(&params, ds)?;
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::WindowSample;
    use crate::graph::WINDOW_SLOTS;
    use crate::gnn::separable_windows;
    use alloc::vec;

    fn small() -> ModelConfig {
        ModelConfig { hidden: 8, blocks: 2, k_dyn: 3, vlad_clusters: 4, ..Default::default() }
    }

    #[test]
    fn overfits_separable_windows() {
        let ds = separable_windows(20, 4, 3);
        let cfg = TrainConfig { adam: AdamConfig { lr: 1e-2, ..Default::default() }, max_epochs: 200, target_accuracy: Some(100.0), ..Default::default() };
        let (_, report) = train(&ds, small(), &cfg, 1).unwrap();
        assert!(report.train_accuracy >= 95.0, "{report:?}");
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let ds = separable_windows(8, 2, 5);
        let cfg = TrainConfig { max_epochs: 3, batch_size: 3, ..Default::default() };
        let a = train(&ds, small(), &cfg, 7).unwrap();
        let b = train(&ds, small(), &cfg, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let ds = separable_windows(6, 2, 2);
        let init = ModelParams::init(small(), 4).unwrap();
        let cfg = TrainConfig { adam: AdamConfig { lr: 0.0, ..Default::default() }, max_epochs: 2, min_lr: 0.0, ..Default::default() };
        let (p, _) = train_from(init.clone(), &ds, &cfg, 0).unwrap();
        assert_eq!(p, init);
    }

    #[test]
    fn frozen_backbone_only_moves_the_head() {
        let ds = separable_windows(6, 2, 2);
        let init = ModelParams::init(small(), 4).unwrap();
        let cfg = TrainConfig { max_epochs: 2, freeze_backbone: true, ..Default::default() };
        let (p, _) = train_from(init.clone(), &ds, &cfg, 0).unwrap();
        let h = init.config.head_start();
        assert_eq!(p.tensors[..h], init.tensors[..h]);
        assert_ne!(p.tensors[h], init.tensors[h]);
    }

    #[test]
    fn single_class_is_rejected() {
        let mut ds = separable_windows(4, 2, 1);
        ds.windows.iter_mut().for_each(|w| w.label = 0);
        assert!(matches!(train(&ds, small(), &TrainConfig::default(), 0), Err(Error::Training(_))));
        let empty = Dataset { frames: vec![], windows: vec![WindowSample { center_time_s: 0.0, slots: vec![None; WINDOW_SLOTS], label: 0, fusion: vec![] }] };
        assert!(train(&empty, small(), &TrainConfig::default(), 0).is_err());
    }
}
