//! Unsupervised 5-class player classification.
//!
//! 1. Midfield frames (everybody far from both goals) supply samples of the two
//!    teams and the referee. Their a\*b\* histograms are over-clustered into
//!    `n` prototypes with k-means, the triplet of prototypes spanning the
//!    largest Bhattacharyya triangle is kept, and each of the three is grown
//!    with a GMM-based distance before a linear SVM draws the final, conservative
//!    boundaries.
//! 2. Goal frames (one person right at the goal, everybody else clear) supply
//!    goalkeeper candidates, cleaned against their median histogram.
//! 3. The five clusters train a [`PlayerClassifier`] used to label everybody.

mod classifier;
mod goalkeepers;
mod prototypes;
mod svm;

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use classifier::{train_player_classifier, ClassifierConfig, ClassifierReport, PlayerClassifier, PlayerModel};
pub use goalkeepers::{extract_goalkeepers, match_keepers_across_halves, GoalkeeperClusters};
pub use prototypes::{grow_prototypes, kmeans_prototypes, select_triplet, triangle_area, GrowConfig, Grown, Prototype};
pub use svm::{svm_refine, LinearOvrSvm, SvmConfig};

use crate::cluster::GmmConfig;
use crate::colorfeat::{self, Histogram64};
use crate::geometry::{self, GoalSide, GoalkeeperRule, PitchPoint, PitchTemplate};
use crate::{Error, Result};

/// Identifies one person patch: frame index in the high half, detection id in
/// the low half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub u64);

impl SampleId {
    pub fn new(frame_index: u32, detection_id: u32) -> Self {
        Self(((frame_index as u64) << 32) | detection_id as u64)
    }

    pub fn frame_index(&self) -> u32 {
        (self.0 >> 32) as u32
    }

    pub fn detection_id(&self) -> u32 {
        self.0 as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: SampleId,
    pub hist: Histogram64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerClass {
    Team1,
    Team2,
    Referee,
    GoalkeeperA,
    GoalkeeperB,
}

impl PlayerClass {
    pub const ALL: [PlayerClass; 5] =
        [PlayerClass::Team1, PlayerClass::Team2, PlayerClass::Referee, PlayerClass::GoalkeeperA, PlayerClass::GoalkeeperB];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PlayerClass::Team1 => "team1",
            PlayerClass::Team2 => "team2",
            PlayerClass::Referee => "referee",
            PlayerClass::GoalkeeperA => "goalkeeper_a",
            PlayerClass::GoalkeeperB => "goalkeeper_b",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn keeper(side: GoalSide) -> Self {
        match side {
            GoalSide::A => PlayerClass::GoalkeeperA,
            GoalSide::B => PlayerClass::GoalkeeperB,
        }
    }
}

/// The five labeled clusters, indexed by [`PlayerClass::index`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusterSet {
    pub team1: Vec<Sample>,
    pub team2: Vec<Sample>,
    pub referee: Vec<Sample>,
    pub goalkeeper_a: Vec<Sample>,
    pub goalkeeper_b: Vec<Sample>,
}

impl ClusterSet {
    pub fn get(&self, class: PlayerClass) -> &Vec<Sample> {
        match class {
            PlayerClass::Team1 => &self.team1,
            PlayerClass::Team2 => &self.team2,
            PlayerClass::Referee => &self.referee,
            PlayerClass::GoalkeeperA => &self.goalkeeper_a,
            PlayerClass::GoalkeeperB => &self.goalkeeper_b,
        }
    }

    pub fn get_mut(&mut self, class: PlayerClass) -> &mut Vec<Sample> {
        match class {
            PlayerClass::Team1 => &mut self.team1,
            PlayerClass::Team2 => &mut self.team2,
            PlayerClass::Referee => &mut self.referee,
            PlayerClass::GoalkeeperA => &mut self.goalkeeper_a,
            PlayerClass::GoalkeeperB => &mut self.goalkeeper_b,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (PlayerClass, &Sample)> {
        PlayerClass::ALL.into_iter().flat_map(move |c| self.get(c).iter().map(move |s| (c, s)))
    }

    pub fn len(&self) -> usize {
        PlayerClass::ALL.iter().map(|&c| self.get(c).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that no sample id appears in two clusters.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (c, s) in self.iter() {
            if !seen.insert(s.id) {
                return Err(Error::Validation(alloc::format!("sample {:?} appears twice (last in {})", s.id, c.name())));
            }
        }
        Ok(())
    }

    pub fn swap_teams(&mut self) {
        core::mem::swap(&mut self.team1, &mut self.team2);
    }

    /// Which team naming agrees with `labels` more often; swaps the two team
    /// clusters when the opposite naming wins. Team identity is arbitrary in an
    /// unsupervised setting, so evaluation aligns names first.
    pub fn align_teams_to(&mut self, labels: &BTreeMap<SampleId, PlayerClass>) {
        let agree = |samples: &[Sample], class: PlayerClass| samples.iter().filter(|s| labels.get(&s.id) == Some(&class)).count();
        let straight = agree(&self.team1, PlayerClass::Team1) + agree(&self.team2, PlayerClass::Team2);
        let swapped = agree(&self.team1, PlayerClass::Team2) + agree(&self.team2, PlayerClass::Team1);
        if swapped > straight {
            self.swap_teams();
        }
    }
}

/// Per-class and overall purity, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityReport {
    /// `None` for an empty cluster.
    pub per_class: [Option<f64>; 5],
    pub overall: f64,
}

/// Fraction of each cluster's members whose ground-truth label is the cluster's
/// class, plus the member-weighted mean.
pub fn purity(clusters: &ClusterSet, labels: &BTreeMap<SampleId, PlayerClass>) -> Result<PurityReport> {
    let mut per_class = [None; 5];
    let (mut hits, mut total) = (0usize, 0usize);
    for class in PlayerClass::ALL {
        let members = clusters.get(class);
        if members.is_empty() {
            continue;
        }
        let mut ok = 0usize;
        for s in members {
            let label = labels
                .get(&s.id)
                .ok_or_else(|| Error::Validation(alloc::format!("sample {:?} has no ground-truth label", s.id)))?;
            ok += (*label == class) as usize;
        }
        per_class[class.index()] = Some(100.0 * ok as f64 / members.len() as f64);
        hits += ok;
        total += members.len();
    }
    let overall = if total == 0 { 0.0 } else { 100.0 * hits as f64 / total as f64 };
    Ok(PurityReport { per_class, overall })
}

/// Every threshold of the clustering procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeamClusterConfig {
    pub n_prototypes: usize,
    pub gmm: GmmConfig,
    pub grow: GrowConfig,
    pub svm: SvmConfig,
    /// Keeper candidates farther than this from their side's median are dropped.
    pub keeper_outlier: f64,
    /// Keeper candidates closer than this to the referee centroid are treated
    /// as referees in the fallback pass.
    pub referee_threshold: f64,
    pub sideline_margin_m: f64,
    pub goalkeeper: GoalkeeperRule,
}

impl Default for TeamClusterConfig {
    fn default() -> Self {
        Self {
            n_prototypes: 6,
            gmm: GmmConfig::default(),
            grow: GrowConfig::default(),
            svm: SvmConfig::default(),
            keeper_outlier: 0.4,
            referee_threshold: 0.30,
            sideline_margin_m: 1.0,
            goalkeeper: GoalkeeperRule::default(),
        }
    }
}

/// One detected person after filtering, localized on the pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    pub sample: Sample,
    pub position: PitchPoint,
}

/// The people of one frame that survived frame and person filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePeople {
    pub frame_index: u32,
    pub people: Vec<Person>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringOutcome {
    pub clusters: ClusterSet,
    pub midfield_frames: usize,
    pub midfield_samples: usize,
    pub prototypes: usize,
    pub triplet: [usize; 3],
    pub keeper_candidates: usize,
    pub unlabeled_sides: Vec<GoalSide>,
}

/// Runs the whole clustering procedure on filtered, localized frames.
pub fn cluster_players(
    frames: &[FramePeople],
    pitch: &PitchTemplate,
    cfg: &TeamClusterConfig,
    seed: u64,
) -> Result<ClusteringOutcome> {
    // Midfield samples.
    let mut midfield_frames = 0;
    let mut pool: Vec<Sample> = Vec::new();
    for f in frames.iter().filter(|f| !f.people.is_empty()) {
        let positions: Vec<PitchPoint> = f.people.iter().map(|p| p.position).collect();
        if geometry::is_midfield_view(&positions, pitch)? {
            midfield_frames += 1;
            pool.extend(
                f.people
                    .iter()
                    .filter(|p| !geometry::near_sideline(&p.position, pitch, cfg.sideline_margin_m))
                    .map(|p| p.sample.clone()),
            );
        }
    }
    if pool.len() < 3 {
        return Err(Error::InsufficientData(alloc::format!("{} midfield samples, need at least 3", pool.len())));
    }
    let n = cfg.n_prototypes.min(pool.len()).max(3);
    let prototypes = kmeans_prototypes(&pool, n, seed, &cfg.gmm)?;
    let triplet = select_triplet(&prototypes)?;
    let chosen: BTreeSet<usize> = triplet.iter().copied().collect();
    let rest: Vec<Sample> = prototypes
        .iter()
        .enumerate()
        .filter(|(i, _)| !chosen.contains(i))
        .flat_map(|(_, p)| p.members.iter().cloned())
        .collect();
    let seeds = triplet.map(|i| prototypes[i].clone());
    let grown = grow_prototypes(seeds, &rest, &cfg.grow, &cfg.gmm, seed)?;
    let final_three = svm_refine(&grown.clusters, &pool, &cfg.svm)?;

    // The referee is the minority class; the two teams are ordered by the
    // dominant bin of their centroid so that naming is deterministic.
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by_key(|&i| (final_three[i].len(), i));
    let referee_idx = order[0];
    let mut teams: Vec<usize> = order[1..].to_vec();
    let dominant = |i: usize| colorfeat::mean_histogram(final_three[i].iter().map(|s| &s.hist)).map(|h| h.argmax()).unwrap_or(0);
    teams.sort_by_key(|&i| (dominant(i), i));

    let mut clusters = ClusterSet {
        team1: final_three[teams[0]].clone(),
        team2: final_three[teams[1]].clone(),
        referee: final_three[referee_idx].clone(),
        ..Default::default()
    };
    let referee_centroid = colorfeat::mean_histogram(clusters.referee.iter().map(|s| &s.hist))
        .ok_or_else(|| Error::InsufficientData("referee cluster is empty".into()))?;

    // Goalkeeper candidates from goal frames.
    let mut candidates: Vec<(GoalSide, Sample)> = Vec::new();
    for f in frames.iter().filter(|f| !f.people.is_empty()) {
        let positions: Vec<(u32, PitchPoint)> = f.people.iter().enumerate().map(|(i, p)| (i as u32, p.position)).collect();
        if let Some((side, idx)) = geometry::goalkeeper_candidate(&positions, pitch, &cfg.goalkeeper) {
            candidates.push((side, f.people[idx as usize].sample.clone()));
        }
    }
    let taken: BTreeSet<SampleId> = clusters.iter().map(|(_, s)| s.id).collect();
    candidates.retain(|(_, s)| !taken.contains(&s.id));
    let keepers = extract_goalkeepers(&candidates, &referee_centroid, cfg.keeper_outlier, cfg.referee_threshold);
    clusters.goalkeeper_a = keepers.side_a;
    clusters.goalkeeper_b = keepers.side_b;
    clusters.check_disjoint()?;

    Ok(ClusteringOutcome {
        clusters,
        midfield_frames,
        midfield_samples: pool.len(),
        prototypes: prototypes.len(),
        triplet,
        keeper_candidates: candidates.len(),
        unlabeled_sides: keepers.unlabeled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(id: u64, bin: usize) -> Sample {
        Sample { id: SampleId(id), hist: Histogram64::one_hot(bin) }
    }

    #[test]
    fn sample_id_packing() {
        let id = SampleId::new(12, 7);
        assert_eq!(id.frame_index(), 12);
        assert_eq!(id.detection_id(), 7);
    }

    #[test]
    fn purity_examples() {
        let mut labels = BTreeMap::new();
        for i in 0..4 {
            labels.insert(SampleId(i), PlayerClass::Team1);
        }
        labels.insert(SampleId(10), PlayerClass::Referee);
        labels.insert(SampleId(11), PlayerClass::Team2);

        let all_right = ClusterSet { team1: vec![s(0, 0), s(1, 0)], referee: vec![s(10, 1)], ..Default::default() };
        let r = purity(&all_right, &labels).unwrap();
        assert_eq!(r.per_class[0], Some(100.0));
        assert_eq!(r.overall, 100.0);

        let half = ClusterSet { team2: vec![s(11, 0), s(2, 0)], ..Default::default() };
        assert_eq!(purity(&half, &labels).unwrap().per_class[1], Some(50.0));

        // Hand count: team1 3/4, referee 1/2 => overall 4/6.
        let mixed = ClusterSet {
            team1: vec![s(0, 0), s(1, 0), s(2, 0), s(11, 0)],
            referee: vec![s(10, 1), s(3, 1)],
            ..Default::default()
        };
        let r = purity(&mixed, &labels).unwrap();
        assert_eq!(r.per_class[0], Some(75.0));
        assert_eq!(r.per_class[2], Some(50.0));
        assert!((r.overall - 400.0 / 6.0).abs() < 1e-12);
        assert!(r.overall >= 50.0 && r.overall <= 75.0);

        let unknown = ClusterSet { team1: vec![s(99, 0)], ..Default::default() };
        assert!(purity(&unknown, &labels).is_err());
    }

    #[test]
    fn team_alignment_swaps_when_better() {
        let mut labels = BTreeMap::new();
        labels.insert(SampleId(0), PlayerClass::Team2);
        labels.insert(SampleId(1), PlayerClass::Team1);
        let mut c = ClusterSet { team1: vec![s(0, 0)], team2: vec![s(1, 1)], ..Default::default() };
        c.align_teams_to(&labels);
        assert_eq!(c.team1[0].id, SampleId(1));
        assert_eq!(purity(&c, &labels).unwrap().overall, 100.0);
    }

    #[test]
    fn disjointness_checked() {
        let c = ClusterSet { team1: vec![s(0, 0)], referee: vec![s(0, 1)], ..Default::default() };
        assert!(c.check_disjoint().is_err());
    }
}
