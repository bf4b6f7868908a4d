//! Generic clustering over flat row-major `f64` data: Lloyd's k-means with
//! k-means++ seeding, and diagonal-covariance Gaussian mixtures fitted by EM.

mod gmm;
mod kmeans;

pub use gmm::{DiagGmm, GmmConfig};
pub use kmeans::{kmeans, KMeansConfig, KMeansResult};

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
