use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{kmeans, KMeansConfig};
use crate::fmath;
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    pub var_floor: f64,
    /// Stop once the mean per-sample log-likelihood improves by less than this.
    pub tol: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self { components: 3, max_iter: 100, var_floor: 1e-6, tol: 1e-6 }
    }
}

/// Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGmm {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl DiagGmm {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    fn component_log_density(&self, c: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((xi, mu), var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            let d = xi - mu;
            acc += d * d / var + fmath::ln(*var);
        }
        -0.5 * (acc + self.dim as f64 * LN_2PI)
    }

    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> =
            (0..self.components()).map(|c| fmath::ln(self.weights[c]) + self.component_log_density(c, x)).collect();
        fmath::log_sum_exp(&terms)
    }

    /// Fits by EM, initialized from a k-means partition. Uses at most as many
    /// components as there are samples; components whose responsibility mass
    /// vanishes are dropped and the weights renormalized.
    pub fn fit(data: &[f64], dim: usize, cfg: &GmmConfig, seed: u64) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 || data.is_empty() {
            return Err(Error::Shape(alloc::format!("{} values do not form rows of {}", data.len(), dim)));
        }
        let n = data.len() / dim;
        let m = cfg.components.clamp(1, n);
        let init = kmeans(data, dim, m, seed, &KMeansConfig::default())?;
        let mut resp = vec![0.0; n * m];
        for (i, &a) in init.assignments.iter().enumerate() {
            resp[i * m + a] = 1.0;
        }
        let mut gmm = DiagGmm { dim, weights: vec![], means: vec![], variances: vec![] };
        gmm.m_step(data, &resp, m, cfg.var_floor);
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..cfg.max_iter {
            let k = gmm.components();
            let mut resp = vec![0.0; n * k];
            let mut ll = 0.0;
            let mut terms = vec![0.0; k];
            for (i, x) in data.chunks_exact(dim).enumerate() {
                for (c, t) in terms.iter_mut().enumerate() {
                    *t = fmath::ln(gmm.weights[c]) + gmm.component_log_density(c, x);
                }
                let lse = fmath::log_sum_exp(&terms);
                ll += lse;
                for c in 0..k {
                    resp[i * k + c] = fmath::exp(terms[c] - lse);
                }
            }
            ll /= n as f64;
            gmm.m_step(data, &resp, k, cfg.var_floor);
            if (ll - prev).abs() < cfg.tol {
                break;
            }
            prev = ll;
        }
        Ok(gmm)
    }

    fn m_step(&mut self, data: &[f64], resp: &[f64], k: usize, var_floor: f64) {
        let dim = self.dim;
        let n = data.len() / dim;
        let mut weights = Vec::with_capacity(k);
        let mut means = Vec::with_capacity(k);
        let mut variances = Vec::with_capacity(k);
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
            if nk <= 1e-10 {
                continue;
            }
            let mut mu = vec![0.0; dim];
            for (i, x) in data.chunks_exact(dim).enumerate() {
                let r = resp[i * k + c];
                if r != 0.0 {
                    for (m, xi) in mu.iter_mut().zip(x) {
                        *m += r * xi;
                    }
                }
            }
            mu.iter_mut().for_each(|m| *m /= nk);
            let mut var = vec![0.0; dim];
            for (i, x) in data.chunks_exact(dim).enumerate() {
                let r = resp[i * k + c];
                if r != 0.0 {
                    for ((v, xi), m) in var.iter_mut().zip(x).zip(&mu) {
                        *v += r * (xi - m) * (xi - m);
                    }
                }
            }
            var.iter_mut().for_each(|v| *v = (*v / nk).max(var_floor));
            weights.push(nk);
            means.push(mu);
            variances.push(var);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        self.weights = weights;
        self.means = means;
        self.variances = variances;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_two_separated_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut data = Vec::new();
        for i in 0..200 {
            let c = if i % 2 == 0 { -5.0 } else { 5.0 };
            data.push(c + rng.gen::<f64>() - 0.5);
            data.push(rng.gen::<f64>() - 0.5);
        }
        let g = DiagGmm::fit(&data, 2, &GmmConfig { components: 2, ..Default::default() }, 1).unwrap();
        assert_eq!(g.components(), 2);
        let mut xs: Vec<f64> = g.means.iter().map(|m| m[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 5.0).abs() < 0.2 && (xs[1] - 5.0).abs() < 0.2);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Uniform(-0.5, 0.5) has variance 1/12.
        assert!((g.variances[0][1] - 1.0 / 12.0).abs() < 0.03);
    }

    #[test]
    fn identical_points_hit_variance_floor() {
        let data = [0.5; 12];
        let g = DiagGmm::fit(&data, 3, &GmmConfig::default(), 0).unwrap();
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g.variances.iter().flatten().all(|&v| v >= 1e-6));
        // Duplicate k-means seeds leave empty components, which are dropped.
        assert_eq!(g.components(), 1);
        assert!(g.log_likelihood(&[0.5, 0.5, 0.5]).is_finite());
    }

    #[test]
    fn fewer_samples_than_components() {
        let data = [0.0, 1.0];
        let g = DiagGmm::fit(&data, 1, &GmmConfig { components: 5, ..Default::default() }, 0).unwrap();
        assert!(g.components() <= 2);
    }
}
