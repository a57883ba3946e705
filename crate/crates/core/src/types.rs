//! Shared domain enums and small containers used across the pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Condyle side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

/// Which of the three acquired slices a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceLabel {
    Axial,
    SagittalLeft,
    SagittalRight,
}

impl fmt::Display for SliceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SliceLabel::Axial => write!(f, "axial"),
            SliceLabel::SagittalLeft => write!(f, "sagittal_left"),
            SliceLabel::SagittalRight => write!(f, "sagittal_right"),
        }
    }
}

/// A pair of values, one per condyle side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerSide<T> {
    pub left: T,
    pub right: T,
}

impl<T> PerSide<T> {
    pub fn new(left: T, right: T) -> Self {
        Self { left, right }
    }

    pub fn get(&self, side: Side) -> &T {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn get_mut(&mut self, side: Side) -> &mut T {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerSide<U> {
        PerSide {
            left: f(&self.left),
            right: f(&self.right),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Side, &T)> {
        [(Side::Left, &self.left), (Side::Right, &self.right)].into_iter()
    }
}

/// Subject-level exclusion verdicts. These are values, not failures: the
/// pipeline reports them in the quality table instead of aborting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExclusionReason {
    NoSimultaneousSagittal,
    NoFullCycle,
    BothCondylesOutOfAxial,
    LeftCondyleOutOfAxial,
    RightCondyleOutOfAxial,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            ExclusionReason::NoSimultaneousSagittal => "No simultaneous sagittal planes imaging",
            ExclusionReason::NoFullCycle => "No full opening-closing cycle",
            ExclusionReason::BothCondylesOutOfAxial => {
                "Masks in the sagittal plane are out of the axial plane"
            }
            ExclusionReason::LeftCondyleOutOfAxial => {
                "The left condyle in the sagittal plane is out of the axial plane"
            }
            ExclusionReason::RightCondyleOutOfAxial => {
                "The right condyle in the sagittal plane is out of the axial plane"
            }
        };
        write!(f, "{text}")
    }
}
