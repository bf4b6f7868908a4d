//! The 17-action vocabulary plus the background class, and ground-truth
//! annotations.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const NUM_ACTIONS: usize = 17;
/// Actions plus background.
pub const NUM_CLASSES: usize = NUM_ACTIONS + 1;
pub const BACKGROUND: usize = NUM_ACTIONS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Penalty,
    KickOff,
    Goal,
    Substitution,
    Offside,
    ShotsOnTarget,
    ShotsOffTarget,
    Clearance,
    BallOutOfPlay,
    ThrowIn,
    Foul,
    IndirectFreeKick,
    DirectFreeKick,
    Corner,
    YellowCard,
    RedCard,
    YellowToRedCard,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Penalty,
        Action::KickOff,
        Action::Goal,
        Action::Substitution,
        Action::Offside,
        Action::ShotsOnTarget,
        Action::ShotsOffTarget,
        Action::Clearance,
        Action::BallOutOfPlay,
        Action::ThrowIn,
        Action::Foul,
        Action::IndirectFreeKick,
        Action::DirectFreeKick,
        Action::Corner,
        Action::YellowCard,
        Action::RedCard,
        Action::YellowToRedCard,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Label as written in annotation files.
    pub fn name(self) -> &'static str {
        match self {
            Action::Penalty => "Penalty",
            Action::KickOff => "Kick-off",
            Action::Goal => "Goal",
            Action::Substitution => "Substitution",
            Action::Offside => "Offside",
            Action::ShotsOnTarget => "Shots on target",
            Action::ShotsOffTarget => "Shots off target",
            Action::Clearance => "Clearance",
            Action::BallOutOfPlay => "Ball out of play",
            Action::ThrowIn => "Throw-in",
            Action::Foul => "Foul",
            Action::IndirectFreeKick => "Indirect free-kick",
            Action::DirectFreeKick => "Direct free-kick",
            Action::Corner => "Corner",
            Action::YellowCard => "Yellow card",
            Action::RedCard => "Red card",
            Action::YellowToRedCard => "Yellow->red card",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(alloc::format!("unknown action label {s:?}")))
    }
}

impl core::fmt::Display for Action {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Class index of an optional action, background last.
pub fn class_index(label: Option<Action>) -> usize {
    label.map_or(BACKGROUND, Action::index)
}

pub fn class_name(index: usize) -> &'static str {
    Action::from_index(index).map_or("background", Action::name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Visible,
    Unshown,
}

impl Visibility {
    pub fn name(self) -> &'static str {
        match self {
            Visibility::Visible => "visible",
            Visibility::Unshown => "unshown",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "visible" | "shown" => Ok(Visibility::Visible),
            "unshown" | "not shown" => Ok(Visibility::Unshown),
            other => Err(Error::Validation(alloc::format!("unknown visibility {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub time_s: f64,
    pub action: Action,
    pub visibility: Visibility,
}
