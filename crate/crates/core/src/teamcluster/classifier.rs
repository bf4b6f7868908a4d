use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClusterSet, PlayerClass, SampleId};
use crate::colorfeat::{Histogram64, HIST_BINS};
use crate::fmath;
use crate::optim::{Adam, AdamConfig, Plateau};
use crate::{Error, Result};

/// Anything that maps a histogram to probabilities over the five classes.
pub trait PlayerModel {
    fn predict(&self, h: &Histogram64) -> [f64; 5];

    fn classify(&self, h: &Histogram64) -> PlayerClass {
        let p = self.predict(h);
        let mut best = 0;
        for i in 1..5 {
            if p[i] > p[best] {
                best = i;
            }
        }
        PlayerClass::ALL[best]
    }
}

/// Multinomial logistic regression over the 64 histogram bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerClassifier {
    /// 5 rows of 64.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl PlayerClassifier {
    pub fn zeros() -> Self {
        Self { weights: vec![vec![0.0; HIST_BINS]; 5], bias: vec![0.0; 5] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != 5 || self.weights.iter().any(|r| r.len() != HIST_BINS) || self.bias.len() != 5 {
            return Err(Error::Shape("player classifier must be 5x64 plus 5 biases".into()));
        }
        if self.weights.iter().flatten().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Validation("player classifier has non-finite parameters".into()));
        }
        Ok(())
    }

    fn logits(&self, h: &Histogram64) -> [f64; 5] {
        core::array::from_fn(|k| self.bias[k] + self.weights[k].iter().zip(h.bins()).map(|(w, x)| w * x).sum::<f64>())
    }
}

impl PlayerModel for PlayerClassifier {
    fn predict(&self, h: &Histogram64) -> [f64; 5] {
        let z = self.logits(h);
        let lse = fmath::log_sum_exp(&z);
        z.map(|v| fmath::exp(v - lse))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub min_lr: f64,
    /// One sample in `validation_modulus` (by id hash) is held out.
    pub validation_modulus: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { adam: AdamConfig::default(), batch_size: 96, patience: 7, max_epochs: 100, min_lr: 1e-6, validation_modulus: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub epochs: usize,
    pub train_samples: usize,
    pub validation_samples: usize,
    /// Full training-set loss after each epoch.
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    /// Epochs after which the learning rate was halved.
    pub lr_drops: Vec<usize>,
    pub final_lr: f64,
    /// Percent; `None` without validation samples.
    pub validation_accuracy: Option<f64>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn is_validation(id: SampleId, modulus: u64) -> bool {
    modulus > 0 && splitmix64(id.0) % modulus == 0
}

fn mean_loss(model: &PlayerClassifier, data: &[(&Histogram64, usize)]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter().map(|(h, y)| -fmath::ln(model.predict(h)[*y].max(1e-300))).sum::<f64>() / data.len() as f64
}

/// Trains the classifier on the five clusters with Adam and a plateau
/// schedule on the validation loss (training loss when nothing is held out).
pub fn train_player_classifier(clusters: &ClusterSet, cfg: &ClassifierConfig, seed: u64) -> Result<(PlayerClassifier, ClassifierReport)> {
    for class in PlayerClass::ALL {
        if clusters.get(class).is_empty() {
            return Err(Error::Training(alloc::format!("cluster {} is empty", class.name())));
        }
    }
    if cfg.batch_size == 0 {
        return Err(Error::Validation("batch size must be positive".into()));
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (class, s) in clusters.iter() {
        let item = (&s.hist, class.index());
        if is_validation(s.id, cfg.validation_modulus) {
            val.push(item);
        } else {
            train.push(item);
        }
    }
    if train.is_empty() {
        return Err(Error::Training("no training samples after the validation split".into()));
    }

    let mut model = PlayerClassifier::zeros();
    let mut opt = Adam::new(cfg.adam, &[5 * HIST_BINS, 5]);
    let mut plateau = Plateau::new(cfg.patience);
    let mut lr = cfg.adam.lr;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = ClassifierReport {
        epochs: 0,
        train_samples: train.len(),
        validation_samples: val.len(),
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
        lr_drops: Vec::new(),
        final_lr: lr,
        validation_accuracy: None,
    };
    let mut flat_w = vec![0.0; 5 * HIST_BINS];
    let mut gw = vec![0.0; 5 * HIST_BINS];
    let mut gb = vec![0.0; 5];
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let (h, y) = train[i];
                let p = model.predict(h);
                for k in 0..5 {
                    let d = (p[k] - (k == y) as u8 as f64) * inv;
                    gb[k] += d;
                    for (g, x) in gw[k * HIST_BINS..(k + 1) * HIST_BINS].iter_mut().zip(h.bins()) {
                        *g += d * x;
                    }
                }
            }
            for k in 0..5 {
                flat_w[k * HIST_BINS..(k + 1) * HIST_BINS].copy_from_slice(&model.weights[k]);
            }
            opt.step(lr, &mut [&mut flat_w, &mut model.bias], &[Some(&gw), Some(&gb)]);
            for k in 0..5 {
                model.weights[k].copy_from_slice(&flat_w[k * HIST_BINS..(k + 1) * HIST_BINS]);
            }
        }
        let tl = mean_loss(&model, &train);
        if !tl.is_finite() {
            return Err(Error::Training(alloc::format!("non-finite training loss at epoch {epoch}")));
        }
        report.train_loss.push(tl);
        let monitored = if val.is_empty() {
            tl
        } else {
            let vl = mean_loss(&model, &val);
            report.validation_loss.push(vl);
            vl
        };
        report.epochs = epoch + 1;
        let next = plateau.step(monitored, lr);
        if next < lr {
            report.lr_drops.push(epoch + 1);
        }
        lr = next;
        if lr < cfg.min_lr {
            break;
        }
    }
    report.final_lr = lr;
    if !val.is_empty() {
        let hits = val.iter().filter(|(h, y)| model.classify(h).index() == *y).count();
        report.validation_accuracy = Some(100.0 * hits as f64 / val.len() as f64);
    }
    Ok((model, report))
}
