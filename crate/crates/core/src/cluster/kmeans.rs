use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sq_dist;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { max_iter: 300 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub k: usize,
    pub dim: usize,
    /// `k × dim`, row-major.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        self.assignments.iter().enumerate().filter(|(_, &a)| a == c).map(|(i, _)| i).collect()
    }
}

fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_plus_plus(data: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.len() / dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(&data[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = data.chunks_exact(dim).map(|p| sq_dist(p, &centroids[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            // Fewer distinct points than clusters: duplicate an existing center.
            first
        };
        let start = centroids.len();
        centroids.extend_from_slice(&data[pick * dim..(pick + 1) * dim]);
        for (p, d) in data.chunks_exact(dim).zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &centroids[start..start + dim]));
        }
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding, deterministic for a given `seed`.
///
/// Converges when an iteration leaves every assignment unchanged, or after
/// `cfg.max_iter` iterations. Ties go to the lowest centroid index.
pub fn kmeans(data: &[f64], dim: usize, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<KMeansResult> {
    if dim == 0 || data.len() % dim != 0 {
        return Err(Error::Shape(alloc::format!("{} values do not form rows of {}", data.len(), dim)));
    }
    let n = data.len() / dim;
    if k == 0 || k > n {
        return Err(Error::Arity(alloc::format!("k-means needs 1 <= k <= {n}, got k = {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(data, dim, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut changed = false;
        for (i, p) in data.chunks_exact(dim).enumerate() {
            let (c, d) = nearest(p, &centroids, dim);
            dists[i] = d;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (p, &c) in data.chunks_exact(dim).zip(&assignments) {
            counts[c] += 1;
            for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..dim {
                    centroids[c * dim + j] = sums[c * dim + j] / counts[c] as f64;
                }
            } else {
                // Re-seed an empty cluster at the worst-fit point, if any point
                // is not already sitting on its centroid.
                let (far, &fd) = dists.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
                if fd > 0.0 {
                    centroids[c * dim..(c + 1) * dim].copy_from_slice(&data[far * dim..(far + 1) * dim]);
                    dists[far] = 0.0;
                }
            }
        }
    }
    let inertia = data
        .chunks_exact(dim)
        .zip(&assignments)
        .map(|(p, &c)| sq_dist(p, &centroids[c * dim..(c + 1) * dim]))
        .sum();
    Ok(KMeansResult { k, dim, centroids, assignments, inertia, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_data(n: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * dim).map(|_| rng.gen::<f64>()).collect()
    }

    // Plain Lloyd from uniformly drawn distinct initial points, as an
    // independent baseline.
    fn random_restart_inertia(data: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> f64 {
        let n = data.len() / dim;
        let mut idx: Vec<usize> = Vec::new();
        while idx.len() < k {
            let i = rng.gen_range(0..n);
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
        let mut cents: Vec<Vec<f64>> = idx.iter().map(|&i| data[i * dim..(i + 1) * dim].to_vec()).collect();
        let mut assign = vec![0; n];
        for _ in 0..300 {
            for i in 0..n {
                let p = &data[i * dim..(i + 1) * dim];
                let mut best = 0;
                for c in 1..k {
                    if sq_dist(p, &cents[c]) < sq_dist(p, &cents[best]) {
                        best = c;
                    }
                }
                assign[i] = best;
            }
            for c in 0..k {
                let members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
                if members.is_empty() {
                    continue;
                }
                for j in 0..dim {
                    cents[c][j] = members.iter().map(|&i| data[i * dim + j]).sum::<f64>() / members.len() as f64;
                }
            }
        }
        (0..n).map(|i| sq_dist(&data[i * dim..(i + 1) * dim], &cents[assign[i]])).sum()
    }

    #[test]
    fn single_cluster_of_identical_points() {
        let h = [0.25, 0.75, 0.0];
        let data: Vec<f64> = h.iter().chain(&h).chain(&h).copied().collect();
        let r = kmeans(&data, 3, 1, 0, &KMeansConfig::default()).unwrap();
        assert_eq!(r.centroid(0), &h);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn separated_points_get_own_clusters() {
        let data = [1.0, 0.0, 0.0, 1.0];
        let r = kmeans(&data, 2, 2, 5, &KMeansConfig::default()).unwrap();
        assert_ne!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn more_clusters_than_distinct_points() {
        let data = [2.0; 10];
        let r = kmeans(&data, 2, 4, 1, &KMeansConfig::default()).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert_eq!(r.cluster_sizes().iter().sum::<usize>(), 5);
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(kmeans(&[1.0, 2.0], 1, 3, 0, &KMeansConfig::default()), Err(Error::Arity(_))));
        assert!(matches!(kmeans(&[1.0, 2.0], 1, 0, 0, &KMeansConfig::default()), Err(Error::Arity(_))));
        assert!(matches!(kmeans(&[1.0, 2.0, 3.0], 2, 1, 0, &KMeansConfig::default()), Err(Error::Shape(_))));
    }

    #[test]
    fn beats_median_of_random_restarts() {
        let data = random_data(50, 8, 42);
        let r = kmeans(&data, 8, 4, 7, &KMeansConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut restarts: Vec<f64> = (0..100).map(|_| random_restart_inertia(&data, 8, 4, &mut rng)).collect();
        restarts.sort_by(f64::total_cmp);
        let median = 0.5 * (restarts[49] + restarts[50]);
        assert!(r.inertia <= median, "{} > {}", r.inertia, median);
    }

    #[test]
    fn deterministic_for_seed() {
        let data = random_data(80, 3, 1);
        let a = kmeans(&data, 3, 5, 11, &KMeansConfig::default()).unwrap();
        let b = kmeans(&data, 3, 5, 11, &KMeansConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
