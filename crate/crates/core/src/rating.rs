//! Star ratings on the 1..=5 scale and the per-view rating sample.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest and highest star rating.
pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("rating {0} outside 1..=5")]
pub struct RatingOutOfRange(pub i64);

/// A 1..=5 star rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Rating(u8);

impl Rating {
    pub fn new(value: u8) -> Result<Self, RatingOutOfRange> {
        if (MIN_RATING..=MAX_RATING).contains(&value) {
            Ok(Self(value))
        } else {
            Err(RatingOutOfRange(i64::from(value)))
        }
    }

    /// Clamps an arbitrary integer into range.
    pub fn saturating(value: i64) -> Self {
        Self(value.clamp(i64::from(MIN_RATING), i64::from(MAX_RATING)) as u8)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }

    /// All five ratings in ascending order.
    pub fn all() -> impl Iterator<Item = Rating> {
        (MIN_RATING..=MAX_RATING).map(Rating)
    }
}

impl TryFrom<u8> for Rating {
    type Error = RatingOutOfRange;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Rating::new(value)
    }
}

impl From<Rating> for u8 {
    fn from(r: Rating) -> u8 {
        r.0
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The four ratings a user gives after one watched video.
///
/// `interest`, `qos` and `qoe` refer to the watched video; `qor` rates the
/// recommendation list shown alongside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub interest: Rating,
    pub qos: Rating,
    pub qor: Rating,
    pub qoe: Rating,
}

impl Sample {
    /// Builds a sample from raw integers, rejecting anything outside 1..=5.
    pub fn from_raw(interest: u8, qos: u8, qor: u8, qoe: u8) -> Result<Self, RatingOutOfRange> {
        Ok(Self {
            interest: Rating::new(interest)?,
            qos: Rating::new(qos)?,
            qor: Rating::new(qor)?,
            qoe: Rating::new(qoe)?,
        })
    }
}
