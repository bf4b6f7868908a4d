use alloc::vec::Vec;

use super::Sample;
use crate::colorfeat::{self, Histogram64};
use crate::geometry::GoalSide;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoalkeeperClusters {
    pub side_a: Vec<Sample>,
    pub side_b: Vec<Sample>,
    /// Sides left empty even after the referee fallback.
    pub unlabeled: Vec<GoalSide>,
}

impl GoalkeeperClusters {
    pub fn side(&self, side: GoalSide) -> &Vec<Sample> {
        match side {
            GoalSide::A => &self.side_a,
            GoalSide::B => &self.side_b,
        }
    }
}

fn median_of(samples: &[Sample]) -> Option<Histogram64> {
    colorfeat::median_histogram(samples.iter().map(|s| &s.hist))
}

fn keep_near_median(samples: &[Sample], threshold: f64) -> Vec<Sample> {
    match median_of(samples) {
        Some(med) => samples.iter().filter(|s| colorfeat::distance(&s.hist, &med) <= threshold).cloned().collect(),
        None => Vec::new(),
    }
}

/// Cleans the goalkeeper candidates of each goal side against their median
/// histogram. A side that ends up empty is retried once without the candidates
/// that look like the referee.
pub fn extract_goalkeepers(
    candidates: &[(GoalSide, Sample)],
    referee_centroid: &Histogram64,
    keeper_outlier: f64,
    referee_threshold: f64,
) -> GoalkeeperClusters {
    let mut out = GoalkeeperClusters::default();
    for side in GoalSide::BOTH {
        let group: Vec<Sample> = candidates.iter().filter(|(s, _)| *s == side).map(|(_, x)| x.clone()).collect();
        let mut kept = keep_near_median(&group, keeper_outlier);
        if kept.is_empty() {
            let cleaned: Vec<Sample> =
                group.into_iter().filter(|s| colorfeat::distance(&s.hist, referee_centroid) >= referee_threshold).collect();
            kept = keep_near_median(&cleaned, keeper_outlier);
        }
        if kept.is_empty() {
            out.unlabeled.push(side);
        }
        match side {
            GoalSide::A => out.side_a = kept,
            GoalSide::B => out.side_b = kept,
        }
    }
    out
}

/// Joins the keeper clusters of two halves. Teams change ends at half time, so
/// the second half's sides are swapped when that pairs the centroids more
/// closely (summed Bhattacharyya distance).
pub fn match_keepers_across_halves(first: GoalkeeperClusters, second: GoalkeeperClusters) -> GoalkeeperClusters {
    let centroid = |s: &[Sample]| colorfeat::mean_histogram(s.iter().map(|x| &x.hist));
    let d = |a: &[Sample], b: &[Sample]| match (centroid(a), centroid(b)) {
        (Some(x), Some(y)) => colorfeat::distance(&x, &y),
        _ => 0.0,
    };
    let straight = d(&first.side_a, &second.side_a) + d(&first.side_b, &second.side_b);
    let crossed = d(&first.side_a, &second.side_b) + d(&first.side_b, &second.side_a);
    let (mut sa, mut sb) = (second.side_a, second.side_b);
    if crossed < straight {
        core::mem::swap(&mut sa, &mut sb);
    }
    let mut side_a = first.side_a;
    side_a.extend(sa);
    let mut side_b = first.side_b;
    side_b.extend(sb);
    let mut unlabeled = Vec::new();
    if side_a.is_empty() {
        unlabeled.push(GoalSide::A);
    }
    if side_b.is_empty() {
        unlabeled.push(GoalSide::B);
    }
    GoalkeeperClusters { side_a, side_b, unlabeled }
}
