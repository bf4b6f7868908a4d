use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Sample;
use crate::colorfeat::{Histogram64, HIST_BINS};
use crate::fmath;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    /// A sample is kept only if its best score and its lead over the
    /// runner-up both exceed this.
    pub tau_margin: f64,
    /// Relative objective improvement that still counts as progress.
    pub tol: f64,
    /// Iterations without progress before stopping.
    pub patience: usize,
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { c: 1.0, tau_margin: 0.25, tol: 1e-4, patience: 200, max_iter: 5000 }
    }
}

/// One-vs-rest linear SVM over standardized histograms.
///
/// Inputs are centered per bin and scaled by one global factor so the average
/// bin variance is 1. Each binary problem weighs its two sides equally and the
/// hinge term is a weighted mean, so the decision function depends only on the
/// class-conditional sample distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOvrSvm {
    pub mean: Vec<f64>,
    pub scale: f64,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearOvrSvm {
    pub fn fit(clusters: &[Vec<Sample>], cfg: &SvmConfig) -> Result<Self> {
        for (i, c) in clusters.iter().enumerate() {
            if c.len() < 2 {
                return Err(Error::InsufficientData(alloc::format!("cluster {i} has {} samples, SVM needs 2", c.len())));
            }
        }
        let n: usize = clusters.iter().map(Vec::len).sum();
        let mut mean = vec![0.0; HIST_BINS];
        for s in clusters.iter().flatten() {
            for (m, v) in mean.iter_mut().zip(s.hist.bins()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = 0.0;
        for s in clusters.iter().flatten() {
            for (m, v) in mean.iter().zip(s.hist.bins()) {
                var += (v - m) * (v - m);
            }
        }
        var /= (n * HIST_BINS) as f64;
        let scale = if var > 1e-18 { 1.0 / fmath::sqrt(var) } else { 1.0 };

        let mut x = Vec::with_capacity(n * HIST_BINS);
        let mut owner = Vec::with_capacity(n);
        for (k, c) in clusters.iter().enumerate() {
            for s in c {
                x.extend(s.hist.bins().iter().zip(&mean).map(|(v, m)| (v - m) * scale));
                owner.push(k);
            }
        }
        let mut weights = Vec::with_capacity(clusters.len());
        let mut bias = Vec::with_capacity(clusters.len());
        for (k, c) in clusters.iter().enumerate() {
            let n_pos = c.len() as f64;
            let n_neg = (n - c.len()) as f64;
            let samples: Vec<(f64, f64)> = owner
                .iter()
                .map(|&o| if o == k { (1.0, 0.5 / n_pos) } else { (-1.0, 0.5 / n_neg) })
                .collect();
            let (w, b) = fit_binary(&x, &samples, cfg);
            weights.push(w);
            bias.push(b);
        }
        Ok(Self { mean, scale, weights, bias })
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, h: &Histogram64) -> Vec<f64> {
        let x: Vec<f64> = h.bins().iter().zip(&self.mean).map(|(v, m)| (v - m) * self.scale).collect();
        self.weights.iter().zip(&self.bias).map(|(w, b)| dot(w, &x) + b).collect()
    }

    /// Class of `h` under the conservative rule, or `None`.
    pub fn assign(&self, h: &Histogram64, tau: f64) -> Option<usize> {
        let scores = self.decision(h);
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        let runner_up = scores.iter().enumerate().filter(|&(i, _)| i != best).map(|(_, &s)| s).fold(f64::NEG_INFINITY, f64::max);
        (scores[best] > tau && scores[best] - runner_up > tau).then_some(best)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn objective(x: &[f64], samples: &[(f64, f64)], w: &[f64], b: f64, c: f64) -> f64 {
    let hinge: f64 = samples
        .iter()
        .enumerate()
        .map(|(i, &(y, om))| om * (1.0 - y * (dot(w, &x[i * HIST_BINS..(i + 1) * HIST_BINS]) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

/// Full-batch subgradient descent on ½‖w‖² + C Σ ω_i hinge_i with step 1/t,
/// returning the best iterate seen.
fn fit_binary(x: &[f64], samples: &[(f64, f64)], cfg: &SvmConfig) -> (Vec<f64>, f64) {
    let mut w = vec![0.0; HIST_BINS];
    let mut b = 0.0;
    let mut best = (w.clone(), b, objective(x, samples, &w, b, cfg.c));
    let mut stale = 0;
    let mut gw = vec![0.0; HIST_BINS];
    for t in 1..=cfg.max_iter {
        gw.copy_from_slice(&w);
        let mut gb = 0.0;
        for (i, &(y, om)) in samples.iter().enumerate() {
            let xi = &x[i * HIST_BINS..(i + 1) * HIST_BINS];
            if y * (dot(&w, xi) + b) < 1.0 {
                let f = cfg.c * om * y;
                for (g, v) in gw.iter_mut().zip(xi) {
                    *g -= f * v;
                }
                gb -= f;
            }
        }
        let eta = 1.0 / t as f64;
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= eta * g;
        }
        b -= eta * gb;
        let j = objective(x, samples, &w, b, cfg.c);
        if j < best.2 - cfg.tol * best.2.abs().max(1e-12) {
            best = (w.clone(), b, j);
            stale = 0;
        } else {
            if j < best.2 {
                best = (w.clone(), b, j);
            }
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    (best.0, best.1)
}

/// Retrains the three grown clusters as an SVM and relabels `pool` with the
/// conservative rule. Output clusters are subsets of `pool`, in pool order.
pub fn svm_refine(clusters: &[Vec<Sample>], pool: &[Sample], cfg: &SvmConfig) -> Result<Vec<Vec<Sample>>> {
    let svm = LinearOvrSvm::fit(clusters, cfg)?;
    let mut out = vec![Vec::new(); clusters.len()];
    for s in pool {
        if let Some(k) = svm.assign(&s.hist, cfg.tau_margin) {
            out[k].push(s.clone());
        }
    }
    Ok(out)
}
