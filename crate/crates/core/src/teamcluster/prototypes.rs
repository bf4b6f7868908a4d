use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Sample;
use crate::cluster::{kmeans, DiagGmm, GmmConfig, KMeansConfig};
use crate::colorfeat::{self, Histogram64, HIST_BINS};
use crate::fmath;
use crate::{Error, Result};

/// A k-means cluster of person histograms with a GMM over its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub members: Vec<Sample>,
    pub centroid: Histogram64,
    pub gmm: DiagGmm,
}

impl Prototype {
    pub fn from_members(members: Vec<Sample>, gmm_cfg: &GmmConfig, seed: u64) -> Result<Self> {
        let centroid = colorfeat::mean_histogram(members.iter().map(|s| &s.hist))
            .ok_or_else(|| Error::InsufficientData("prototype without members".into()))?;
        let gmm = fit_gmm(&members, gmm_cfg, seed)?;
        Ok(Self { members, centroid, gmm })
    }

    pub fn member_ids(&self) -> impl Iterator<Item = super::SampleId> + '_ {
        self.members.iter().map(|s| s.id)
    }

    /// Median Bhattacharyya distance between `h` and the GMM component means.
    pub fn distance(&self, h: &Histogram64) -> f64 {
        let mut d: Vec<f64> = self.gmm.means.iter().map(|mu| component_distance(h, mu)).collect();
        fmath::median(&mut d)
    }
}

fn component_distance(h: &Histogram64, mean: &[f64]) -> f64 {
    // EM means of simplex points stay on the simplex up to rounding; project
    // back before comparing.
    let mut counts = [0.0; HIST_BINS];
    for (c, &m) in counts.iter_mut().zip(mean) {
        *c = m.max(0.0);
    }
    match Histogram64::from_counts(&counts, 1) {
        Some(mu) => colorfeat::distance(h, &mu),
        None => 1.0,
    }
}

fn fit_gmm(members: &[Sample], cfg: &GmmConfig, seed: u64) -> Result<DiagGmm> {
    let data: Vec<f64> = members.iter().flat_map(|s| s.hist.bins().iter().copied()).collect();
    DiagGmm::fit(&data, HIST_BINS, cfg, seed)
}

/// Over-clusters the samples into (at most) `n` prototypes with k-means on the
/// raw histogram vectors. Clusters left empty by duplicate seeds are dropped.
pub fn kmeans_prototypes(samples: &[Sample], n: usize, seed: u64, gmm_cfg: &GmmConfig) -> Result<Vec<Prototype>> {
    if n == 0 || n > samples.len() {
        return Err(Error::Arity(alloc::format!("cannot form {n} prototypes from {} samples", samples.len())));
    }
    let data: Vec<f64> = samples.iter().flat_map(|s| s.hist.bins().iter().copied()).collect();
    let km = kmeans(&data, HIST_BINS, n, seed, &KMeansConfig::default())?;
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let members: Vec<Sample> = km.members(c).into_iter().map(|i| samples[i].clone()).collect();
        if members.is_empty() {
            continue;
        }
        out.push(Prototype::from_members(members, gmm_cfg, seed.wrapping_add(c as u64))?);
    }
    Ok(out)
}

/// Heron's formula; 0 when the sides violate the triangle inequality.
pub fn triangle_area(d12: f64, d13: f64, d23: f64) -> f64 {
    let s = 0.5 * (d12 + d13 + d23);
    let f = [s, s - d12, s - d13, s - d23];
    if f.iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    fmath::sqrt(f[0] * f[1] * f[2] * f[3])
}

/// Indices of the three prototypes whose centroids span the largest
/// Bhattacharyya triangle. Exhaustive; ties keep the lexicographically first
/// triple.
pub fn select_triplet(prototypes: &[Prototype]) -> Result<[usize; 3]> {
    let centroids: Vec<&Histogram64> = prototypes.iter().map(|p| &p.centroid).collect();
    select_triplet_by_centroids(&centroids)
}

pub(crate) fn select_triplet_by_centroids(centroids: &[&Histogram64]) -> Result<[usize; 3]> {
    let n = centroids.len();
    if n < 3 {
        return Err(Error::Arity(alloc::format!("triplet search needs at least 3 prototypes, got {n}")));
    }
    let mut d = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = colorfeat::distance(centroids[i], centroids[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut best = ([0, 1, 2], f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let a = triangle_area(d[i * n + j], d[i * n + k], d[j * n + k]);
                if a > best.1 {
                    best = ([i, j, k], a);
                }
            }
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowConfig {
    /// Required gap between the chosen prototype's distance and both others.
    pub lambda: f64,
    /// A sample joins only when its distance is below this ("close to zero").
    pub d_near_zero: f64,
    /// Upper bound on assign/refit rounds; growth stops earlier once a round
    /// adds nothing.
    pub max_rounds: usize,
}

impl Default for GrowConfig {
    fn default() -> Self {
        Self { lambda: 0.10, d_near_zero: 0.15, max_rounds: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grown {
    /// Seed members first, additions after, per prototype.
    pub clusters: [Vec<Sample>; 3],
    pub prototypes: [Prototype; 3],
    pub unassigned: Vec<Sample>,
}

/// Grows the three seed prototypes with samples from `rest`.
///
/// Each round assigns a sample to prototype `P` when its distance `d` to `P` is
/// below `d_near_zero` and `d + λ` is below its distance to each of the other
/// two, then refits the three GMMs on the enlarged memberships.
pub fn grow_prototypes(
    triplet: [Prototype; 3],
    rest: &[Sample],
    cfg: &GrowConfig,
    gmm_cfg: &GmmConfig,
    seed: u64,
) -> Result<Grown> {
    let mut prototypes = triplet;
    let mut clusters: [Vec<Sample>; 3] = core::array::from_fn(|i| prototypes[i].members.clone());
    let mut unassigned: Vec<Sample> = rest.to_vec();
    for round in 0..cfg.max_rounds {
        let mut added = [false; 3];
        let mut keep = Vec::with_capacity(unassigned.len());
        for s in unassigned.drain(..) {
            let d = [prototypes[0].distance(&s.hist), prototypes[1].distance(&s.hist), prototypes[2].distance(&s.hist)];
            let target = (0..3).find(|&p| d[p] < cfg.d_near_zero && (0..3).all(|q| q == p || d[p] + cfg.lambda < d[q]));
            match target {
                Some(p) => {
                    clusters[p].push(s);
                    added[p] = true;
                }
                None => keep.push(s),
            }
        }
        unassigned = keep;
        if !added.iter().any(|&a| a) {
            break;
        }
        for p in 0..3 {
            if added[p] {
                let gmm = fit_gmm(&clusters[p], gmm_cfg, seed.wrapping_add(((round as u64) << 8) | p as u64))?;
                let centroid = colorfeat::mean_histogram(clusters[p].iter().map(|s| &s.hist))
                    .ok_or_else(|| Error::InsufficientData("empty grown prototype".into()))?;
                prototypes[p] = Prototype { members: clusters[p].clone(), centroid, gmm };
            }
        }
    }
    Ok(Grown { clusters, prototypes, unassigned })
}

#[cfg(test)]
mod tests {
    use super::super::SampleId;
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(id: u64, hist: Histogram64) -> Sample {
        Sample { id: SampleId(id), hist }
    }

    fn proto(hists: &[Histogram64], first_id: u64) -> Prototype {
        let members = hists.iter().enumerate().map(|(i, h)| sample(first_id + i as u64, h.clone())).collect();
        Prototype::from_members(members, &GmmConfig::default(), 0).unwrap()
    }

    /// Histogram concentrated on `center` bins with random leakage.
    fn blob_hist(center: &[usize], rng: &mut ChaCha8Rng, leak: f64) -> Histogram64 {
        let mut counts = [0.0; 64];
        for &c in center {
            counts[c] = 1.0 + 0.2 * rng.gen::<f64>();
        }
        for _ in 0..3 {
            counts[rng.gen_range(0..64)] += leak * rng.gen::<f64>();
        }
        Histogram64::from_counts(&counts, 100).unwrap()
    }

    #[test]
    fn heron_examples() {
        assert!((triangle_area(3.0, 4.0, 5.0) - 6.0).abs() < 1e-12);
        assert!((triangle_area(1.0, 1.0, 1.0) - 3f64.sqrt() / 4.0).abs() < 1e-12);
        assert_eq!(triangle_area(1.0, 2.0, 3.5), 0.0);
        assert_eq!(triangle_area(1.0, 2.0, 3.0), 0.0);
    }

    #[test]
    fn triplet_examples() {
        let three: Vec<Histogram64> = (0..3).map(Histogram64::one_hot).collect();
        let refs: Vec<&Histogram64> = three.iter().collect();
        assert_eq!(select_triplet_by_centroids(&refs).unwrap(), [0, 1, 2]);

        // Prototype 1 duplicates 0: any triple holding both has a zero side.
        let mut half = [0.0; 64];
        half[5] = 0.5;
        half[6] = 0.5;
        let hs = [Histogram64::one_hot(0), Histogram64::one_hot(0), Histogram64::one_hot(1), Histogram64::try_from_bins(half, 1).unwrap()];
        let refs: Vec<&Histogram64> = hs.iter().collect();
        let t = select_triplet_by_centroids(&refs).unwrap();
        assert!(!(t.contains(&0) && t.contains(&1)));
        assert_eq!(t, [0, 2, 3]);

        assert!(matches!(select_triplet_by_centroids(&refs[..2]), Err(Error::Arity(_))));
    }

    #[test]
    fn triplet_matches_enumeration_for_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 3..=8 {
            for _ in 0..10 {
                let hs: Vec<Histogram64> = (0..n)
                    .map(|_| {
                        let counts: [f64; 64] = core::array::from_fn(|_| rng.gen::<f64>().powi(6));
                        Histogram64::from_counts(&counts, 1).unwrap()
                    })
                    .collect();
                let refs: Vec<&Histogram64> = hs.iter().collect();
                let got = select_triplet_by_centroids(&refs).unwrap();
                // Enumerate via sqrt(1 - BC) directly.
                let dist = |a: &Histogram64, b: &Histogram64| {
                    let bc: f64 = a.bins().iter().zip(b.bins()).map(|(x, y)| (x * y).sqrt()).sum();
                    (1.0 - bc).max(0.0).sqrt()
                };
                let mut best = (f64::NEG_INFINITY, [0; 3]);
                for i in 0..n {
                    for j in i + 1..n {
                        for k in j + 1..n {
                            let (a, b, c) = (dist(&hs[i], &hs[j]), dist(&hs[i], &hs[k]), dist(&hs[j], &hs[k]));
                            let s = (a + b + c) / 2.0;
                            let area = (s * (s - a) * (s - b) * (s - c)).max(0.0).sqrt();
                            if area > best.0 + 1e-12 {
                                best = (area, [i, j, k]);
                            }
                        }
                    }
                }
                assert_eq!(got, best.1);
            }
        }
    }

    #[test]
    fn exact_component_match_is_absorbed() {
        let p1 = proto(&[Histogram64::one_hot(0), Histogram64::one_hot(0)], 0);
        let p2 = proto(&[Histogram64::one_hot(10), Histogram64::one_hot(10)], 10);
        let p3 = proto(&[Histogram64::one_hot(20), Histogram64::one_hot(20)], 20);
        let probe = sample(100, Histogram64::one_hot(0));
        let g = grow_prototypes([p1, p2, p3], core::slice::from_ref(&probe), &GrowConfig::default(), &GmmConfig::default(), 0).unwrap();
        assert!(g.clusters[0].contains(&probe));
        assert!(g.unassigned.is_empty());
    }

    #[test]
    fn equidistant_sample_stays_out() {
        let p1 = proto(&[Histogram64::one_hot(0)], 0);
        let p2 = proto(&[Histogram64::one_hot(1)], 10);
        let p3 = proto(&[Histogram64::one_hot(2)], 20);
        let mut bins = [0.0; 64];
        bins[0] = 1.0 / 3.0;
        bins[1] = 1.0 / 3.0;
        bins[2] = 1.0 / 3.0;
        let probe = sample(100, Histogram64::from_counts(&bins, 3).unwrap());
        let g = grow_prototypes([p1, p2, p3], core::slice::from_ref(&probe), &GrowConfig::default(), &GmmConfig::default(), 0).unwrap();
        assert_eq!(g.unassigned, vec![probe]);
    }

    #[test]
    fn synthetic_blobs_absorbed() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let centers: [&[usize]; 3] = [&[9, 10], &[33], &[50, 58]];
        let mut seeds = Vec::new();
        let mut held_out = Vec::new();
        let mut id = 0;
        for (b, c) in centers.iter().enumerate() {
            let mut hs = Vec::new();
            for _ in 0..30 {
                hs.push(blob_hist(c, &mut rng, 0.005));
            }
            seeds.push(proto(&hs, id));
            id += 100;
            for _ in 0..60 {
                held_out.push((b, sample(id, blob_hist(c, &mut rng, 0.005))));
                id += 1;
            }
        }
        let rest: Vec<Sample> = held_out.iter().map(|(_, s)| s.clone()).collect();
        let seeds: [Prototype; 3] = seeds.try_into().unwrap();
        let seed_ids: Vec<Vec<SampleId>> = seeds.iter().map(|p| p.member_ids().collect()).collect();
        let g = grow_prototypes(seeds, &rest, &GrowConfig::default(), &GmmConfig::default(), 3).unwrap();
        let correct = held_out.iter().filter(|(b, s)| g.clusters[*b].iter().any(|m| m.id == s.id)).count();
        assert!(correct as f64 >= 0.95 * held_out.len() as f64, "{correct}/{}", held_out.len());
        // Seeds never move.
        for (p, ids) in seed_ids.iter().enumerate() {
            assert_eq!(&g.clusters[p][..ids.len()].iter().map(|s| s.id).collect::<Vec<_>>(), ids);
        }
    }

    #[test]
    fn kmeans_prototypes_partition_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<Sample> = (0..40).map(|i| sample(i, blob_hist(&[(i % 4) as usize * 10], &mut rng, 0.1))).collect();
        let protos = kmeans_prototypes(&samples, 4, 9, &GmmConfig::default()).unwrap();
        assert_eq!(protos.iter().map(|p| p.members.len()).sum::<usize>(), 40);
        for p in &protos {
            let first = p.members[0].id.0 % 4;
            assert!(p.members.iter().all(|m| m.id.0 % 4 == first));
            assert!((p.gmm.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let one = kmeans_prototypes(&samples[..3], 1, 0, &GmmConfig::default()).unwrap();
        assert_eq!(one.len(), 1);
        assert!(matches!(kmeans_prototypes(&samples[..3], 4, 0, &GmmConfig::default()), Err(Error::Arity(_))));
    }
}
