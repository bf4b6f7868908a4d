//! Pitch template, image-to-pitch projection and the view rules used to pick
//! midfield and goal frames.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::ingest::BBox;
use crate::{Error, Result};

/// Depth below which a projected point is treated as lying at infinity.
pub const MIN_PROJECTIVE_DEPTH: f64 = 1e-9;

/// 3×3 projective map, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Homography(pub [[f64; 3]; 3]);

impl Homography {
    pub fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Self(rows)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `self · other` (apply `other` first).
    pub fn compose(&self, other: &Homography) -> Homography {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Homography(out)
    }

    pub fn inverse(&self) -> Result<Homography> {
        let det = self.determinant();
        if det.abs() <= 1e-12 {
            return Err(Error::Contract("homography is singular".into()));
        }
        let m = &self.0;
        let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let adj = [
            [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
            [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
            [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
        ];
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = adj[i][j] / det;
            }
        }
        Ok(Homography(out))
    }

    /// Homogeneous image of `(x, y, 1)`.
    pub fn apply_homogeneous(&self, x: f64, y: f64) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * x + m[0][1] * y + m[0][2],
            m[1][0] * x + m[1][1] * y + m[1][2],
            m[2][0] * x + m[2][1] * y + m[2][2],
        ]
    }
}

/// Pitch template centered at the kick-off spot; `x` runs goal to goal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchTemplate {
    pub length_m: f64,
    pub width_m: f64,
}

impl Default for PitchTemplate {
    fn default() -> Self {
        Self { length_m: 105.0, width_m: 68.0 }
    }
}

impl PitchTemplate {
    pub fn new(length_m: f64, width_m: f64) -> Result<Self> {
        if !(length_m > 0.0 && width_m > 0.0) {
            return Err(Error::Validation(alloc::format!("pitch dimensions must be positive, got {length_m}x{width_m}")));
        }
        Ok(Self { length_m, width_m })
    }

    pub fn goal_center(&self, side: GoalSide) -> PitchPoint {
        match side {
            GoalSide::A => PitchPoint::new(self.length_m / 2.0, 0.0),
            GoalSide::B => PitchPoint::new(-self.length_m / 2.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchPoint {
    pub x: f64,
    pub y: f64,
}

impl PitchPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PitchPoint) -> f64 {
        fmath::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Goal A sits at `+length/2`, goal B at `-length/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GoalSide {
    A,
    B,
}

impl GoalSide {
    pub const BOTH: [GoalSide; 2] = [GoalSide::A, GoalSide::B];
}

/// Ground contact point: bottom-center of the box.
pub fn foot_point(bbox: &BBox) -> (f64, f64) {
    ((bbox.x_min + bbox.x_max) / 2.0, bbox.y_max)
}

pub fn project_to_pitch(p: (f64, f64), h: &Homography) -> Result<PitchPoint> {
    let [x, y, w] = h.apply_homogeneous(p.0, p.1);
    if w.abs() <= MIN_PROJECTIVE_DEPTH {
        return Err(Error::ProjectionAtInfinity(w));
    }
    Ok(PitchPoint::new(x / w, y / w))
}

/// Fraction of the pitch length every person must keep from both goal centers.
pub const MIDFIELD_FRACTION: f64 = 0.30;

/// True when every person is at least 30% of the pitch length away from both
/// goal centers.
pub fn is_midfield_view(positions: &[PitchPoint], pitch: &PitchTemplate) -> Result<bool> {
    if positions.is_empty() {
        return Err(Error::NotApplicable("midfield rule needs at least one person"));
    }
    let min_dist = MIDFIELD_FRACTION * pitch.length_m;
    let goals = GoalSide::BOTH.map(|s| pitch.goal_center(s));
    Ok(positions.iter().all(|p| goals.iter().all(|g| p.distance(g) >= min_dist)))
}

/// Which pitch axis the goalkeeper percentages refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GoalkeeperAxis {
    #[default]
    Width,
    Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalkeeperRule {
    pub axis: GoalkeeperAxis,
    /// The keeper must be within this fraction of the axis from the goal center.
    pub near_frac: f64,
    /// Everybody else must be at least this fraction away.
    pub clear_frac: f64,
}

impl Default for GoalkeeperRule {
    fn default() -> Self {
        Self { axis: GoalkeeperAxis::Width, near_frac: 0.04, clear_frac: 0.08 }
    }
}

impl GoalkeeperRule {
    fn reference(&self, pitch: &PitchTemplate) -> f64 {
        match self.axis {
            GoalkeeperAxis::Width => pitch.width_m,
            GoalkeeperAxis::Length => pitch.length_m,
        }
    }

    pub fn near_m(&self, pitch: &PitchTemplate) -> f64 {
        self.near_frac * self.reference(pitch)
    }

    pub fn clear_m(&self, pitch: &PitchTemplate) -> f64 {
        self.clear_frac * self.reference(pitch)
    }
}

/// Finds the single person close to one goal with everyone else kept clear.
///
/// Goal A is checked first; at most one side can qualify for a non-degenerate
/// pitch since the near radius is far smaller than the pitch length.
pub fn goalkeeper_candidate(
    positions: &[(u32, PitchPoint)],
    pitch: &PitchTemplate,
    rule: &GoalkeeperRule,
) -> Option<(GoalSide, u32)> {
    let near = rule.near_m(pitch);
    let clear = rule.clear_m(pitch);
    for side in GoalSide::BOTH {
        let goal = pitch.goal_center(side);
        let close: Vec<usize> = positions
            .iter()
            .enumerate()
            .filter(|(_, (_, p))| p.distance(&goal) <= near)
            .map(|(i, _)| i)
            .collect();
        if close.len() != 1 {
            continue;
        }
        let keeper = close[0];
        let others_clear =
            positions.iter().enumerate().all(|(i, (_, p))| i == keeper || p.distance(&goal) >= clear);
        if others_clear {
            return Some((side, positions[keeper].0));
        }
    }
    None
}

/// True when the point is within `margin_m` of a touchline or goal line, or
/// outside the pitch.
pub fn near_sideline(p: &PitchPoint, pitch: &PitchTemplate, margin_m: f64) -> bool {
    p.y.abs() >= pitch.width_m / 2.0 - margin_m || p.x.abs() >= pitch.length_m / 2.0 - margin_m
}
