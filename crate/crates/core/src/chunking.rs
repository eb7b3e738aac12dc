//! Turn and height classification, and the split of a trajectory into
//! sub-trajectories.
//!
//! Right-side turn intervals are closed below and open above (`[15, 45)`),
//! left-side intervals are their mirror images (`(-45, -15]`), and
//! `|Δψ| >= 165` is a backward turn. Vertical moves of at least 0.2 m in
//! either direction leave the level class.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::navgraph::{normalize_heading, Pose, Trajectory};

pub const VERTICAL_THRESHOLD_M: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizontalClass {
    Straight,
    SlightRight,
    ModerateRight,
    HardRight,
    SlightRightRear,
    SharpRightRear,
    Backward,
    SlightLeft,
    ModerateLeft,
    HardLeft,
    SlightLeftRear,
    SharpLeftRear,
}

/// The four-way grouping used while sampling: straight, right, left, backward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoarseDirection {
    Straight,
    Right,
    Left,
    Backward,
}

impl HorizontalClass {
    pub const ALL: [HorizontalClass; 12] = [
        HorizontalClass::Straight,
        HorizontalClass::SlightRight,
        HorizontalClass::ModerateRight,
        HorizontalClass::HardRight,
        HorizontalClass::SlightRightRear,
        HorizontalClass::SharpRightRear,
        HorizontalClass::Backward,
        HorizontalClass::SlightLeft,
        HorizontalClass::ModerateLeft,
        HorizontalClass::HardLeft,
        HorizontalClass::SlightLeftRear,
        HorizontalClass::SharpLeftRear,
    ];

    pub fn classify(turn_angle: f64) -> Result<Self> {
        let d = normalize_heading(ensure_finite("turn angle", turn_angle)?);
        const RIGHT: [HorizontalClass; 5] = [
            HorizontalClass::SlightRight,
            HorizontalClass::ModerateRight,
            HorizontalClass::HardRight,
            HorizontalClass::SlightRightRear,
            HorizontalClass::SharpRightRear,
        ];
        const LEFT: [HorizontalClass; 5] = [
            HorizontalClass::SlightLeft,
            HorizontalClass::ModerateLeft,
            HorizontalClass::HardLeft,
            HorizontalClass::SlightLeftRear,
            HorizontalClass::SharpLeftRear,
        ];
        if d.abs() < 15.0 {
            return Ok(HorizontalClass::Straight);
        }
        if d.abs() >= 165.0 {
            return Ok(HorizontalClass::Backward);
        }
        // 15 <= |d| < 165, in 30° bands
        let band = ((d.abs() - 15.0) / 30.0).floor() as usize;
        let band = band.min(4);
        Ok(if d > 0.0 { RIGHT[band] } else { LEFT[band] })
    }

    pub fn coarse(self) -> CoarseDirection {
        use HorizontalClass::*;
        match self {
            Straight => CoarseDirection::Straight,
            Backward => CoarseDirection::Backward,
            SlightRight | ModerateRight | HardRight | SlightRightRear | SharpRightRear => CoarseDirection::Right,
            SlightLeft | ModerateLeft | HardLeft | SlightLeftRear | SharpLeftRear => CoarseDirection::Left,
        }
    }

    pub fn phrase(self) -> &'static str {
        use HorizontalClass::*;
        match self {
            Straight => "go straight",
            SlightRight => "turn slightly right",
            ModerateRight => "turn moderately right",
            HardRight => "turn hardly right",
            SlightRightRear => "turn slightly to the right rear",
            SharpRightRear => "turn sharply to the right rear",
            Backward => "turn backwards",
            SlightLeft => "turn slightly left",
            ModerateLeft => "turn moderately left",
            HardLeft => "turn hardly left",
            SlightLeftRear => "turn slightly to the left rear",
            SharpLeftRear => "turn sharply to the left rear",
        }
    }

    pub fn key(self) -> &'static str {
        use HorizontalClass::*;
        match self {
            Straight => "straight",
            SlightRight => "slight_right",
            ModerateRight => "moderate_right",
            HardRight => "hard_right",
            SlightRightRear => "slight_right_rear",
            SharpRightRear => "sharp_right_rear",
            Backward => "backward",
            SlightLeft => "slight_left",
            ModerateLeft => "moderate_left",
            HardLeft => "hard_left",
            SlightLeftRear => "slight_left_rear",
            SharpLeftRear => "sharp_left_rear",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.key() == key)
    }
}

impl fmt::Display for HorizontalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalClass {
    Level,
    Upward,
    Downward,
}

impl VerticalClass {
    pub const ALL: [VerticalClass; 3] = [VerticalClass::Level, VerticalClass::Upward, VerticalClass::Downward];

    pub fn classify(vertical_delta: f64) -> Result<Self> {
        let dz = ensure_finite("vertical delta", vertical_delta)?;
        Ok(if dz >= VERTICAL_THRESHOLD_M {
            VerticalClass::Upward
        } else if dz <= -VERTICAL_THRESHOLD_M {
            VerticalClass::Downward
        } else {
            VerticalClass::Level
        })
    }

    /// Word inserted after "walk"; empty for level moves.
    pub fn word(self) -> &'static str {
        match self {
            VerticalClass::Level => "",
            VerticalClass::Upward => "upwards",
            VerticalClass::Downward => "downwards",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            VerticalClass::Level => "level",
            VerticalClass::Upward => "upward",
            VerticalClass::Downward => "downward",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.key() == key)
    }
}

pub fn classify_horizontal(turn_angle: f64) -> Result<HorizontalClass> {
    HorizontalClass::classify(turn_angle)
}

pub fn classify_vertical(vertical_delta: f64) -> Result<VerticalClass> {
    VerticalClass::classify(vertical_delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubTrajectoryKind {
    StraightRun,
    SingleTurn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubTrajectory {
    /// Step range `[start, end)` within the parent trajectory.
    pub steps: Range<usize>,
    pub kind: SubTrajectoryKind,
    pub horizontal: HorizontalClass,
    /// Sum of the per-step height changes over the range.
    pub vertical_delta: f64,
    pub entry: Pose,
    pub exit: Pose,
    /// Heading of the last edge walked in the range.
    pub exit_heading: f64,
}

impl SubTrajectory {
    pub fn vertical(&self) -> VerticalClass {
        // vertical_delta is a sum of finite deltas
        VerticalClass::classify(self.vertical_delta).unwrap_or(VerticalClass::Level)
    }
}

/// Groups step classes: maximal runs of `Straight` become one range, every
/// other step is a range of its own.
pub fn group_steps(classes: &[HorizontalClass]) -> Vec<Range<usize>> {
    let mut ranges = Vec::new();
    let mut i = 0;
    while i < classes.len() {
        let start = i;
        if classes[i] == HorizontalClass::Straight {
            while i < classes.len() && classes[i] == HorizontalClass::Straight {
                i += 1;
            }
        } else {
            i += 1;
        }
        ranges.push(start..i);
    }
    ranges
}

pub fn chunk_trajectory(trajectory: &Trajectory) -> Result<Vec<SubTrajectory>> {
    chunk_trajectory_with(trajectory, true)
}

/// Like [`chunk_trajectory`]; with `merge_straight` off every step becomes
/// its own sub-trajectory.
pub fn chunk_trajectory_with(trajectory: &Trajectory, merge_straight: bool) -> Result<Vec<SubTrajectory>> {
    if trajectory.steps() == 0 {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    let classes =
        trajectory.deltas.iter().map(|d| HorizontalClass::classify(d.turn_angle)).collect::<Result<Vec<_>>>()?;

    let ranges = if merge_straight { group_steps(&classes) } else { (0..classes.len()).map(|i| i..i + 1).collect() };
    Ok(ranges
        .into_iter()
        .map(|steps| {
            let horizontal = classes[steps.start];
            let kind = if horizontal == HorizontalClass::Straight {
                SubTrajectoryKind::StraightRun
            } else {
                SubTrajectoryKind::SingleTurn
            };
            let vertical_delta = trajectory.deltas[steps.clone()].iter().map(|d| d.vertical_delta).sum();
            SubTrajectory {
                kind,
                horizontal,
                vertical_delta,
                entry: trajectory.poses[steps.start].clone(),
                exit: trajectory.poses[steps.end].clone(),
                exit_heading: trajectory.edge_heading(steps.end - 1),
                steps,
            }
        })
        .collect())
}
