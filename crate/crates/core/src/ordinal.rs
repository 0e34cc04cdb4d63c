//! Ordered class scale and discretization of real-valued observations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A class on the ordered scale `C_1 < C_2 < ... < C_Q`, stored by 1-based rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrdinalLabel(usize);

impl OrdinalLabel {
    /// Creates a label from its 1-based rank, checking it against `num_classes`.
    pub fn new(rank: usize, num_classes: usize) -> Result<Self> {
        if rank == 0 || rank > num_classes {
            return Err(Error::LabelOutOfRange { rank, num_classes });
        }
        Ok(OrdinalLabel(rank))
    }

    /// Label for a 0-based class index. The caller guarantees the bound.
    pub fn from_index(index: usize) -> Self {
        OrdinalLabel(index + 1)
    }

    pub fn rank(self) -> usize {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 - 1
    }

    /// Distance in ranks between two labels.
    pub fn distance(self, other: OrdinalLabel) -> usize {
        self.0.abs_diff(other.0)
    }
}

impl fmt::Display for OrdinalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// Cut-points `R_1 < ... < R_{Q-1}` partitioning the real line into `Q` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OrdinalScale {
    thresholds: Vec<f64>,
}

impl OrdinalScale {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidScale(
                "at least one threshold is required (Q >= 2)".into(),
            ));
        }
        if let Some(t) = thresholds.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidScale(format!("non-finite threshold {t}")));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScale(format!(
                "thresholds must be strictly ascending: {thresholds:?}"
            )));
        }
        Ok(OrdinalScale { thresholds })
    }

    /// Runway visual range scale in metres: 300, 550, 2000.
    pub fn rvr() -> Self {
        OrdinalScale {
            thresholds: vec![300.0, 550.0, 2000.0],
        }
    }

    /// Cloud height scale in metres: 200, 1500.
    pub fn cloud_height() -> Self {
        OrdinalScale {
            thresholds: vec![200.0, 1500.0],
        }
    }

    /// A label-only scale with `num_classes` classes and unit-spaced cut-points.
    pub fn with_classes(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidScale(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        Ok(OrdinalScale {
            thresholds: (1..num_classes).map(|q| q as f64 + 0.5).collect(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn label(&self, rank: usize) -> Result<OrdinalLabel> {
        OrdinalLabel::new(rank, self.num_classes())
    }

    /// Maps a raw observation to its class: `C_q` where `R_{q-1} <= raw < R_q`.
    pub fn discretize(&self, raw: f64) -> Result<OrdinalLabel> {
        if !raw.is_finite() {
            return Err(Error::NonFiniteValue(raw));
        }
        // number of cut-points at or below raw
        let below = self.thresholds.partition_point(|&r| r <= raw);
        Ok(OrdinalLabel(below + 1))
    }
}

impl TryFrom<Vec<f64>> for OrdinalScale {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        OrdinalScale::new(v)
    }
}

impl From<OrdinalScale> for Vec<f64> {
    fn from(s: OrdinalScale) -> Self {
        s.thresholds
    }
}

/// Free-function form of [`OrdinalScale::discretize`].
pub fn discretize(raw: f64, scale: &OrdinalScale) -> Result<OrdinalLabel> {
    scale.discretize(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rvr_examples() {
        let s = OrdinalScale::rvr();
        assert_eq!(s.num_classes(), 4);
        assert_eq!(s.discretize(100.0).unwrap().rank(), 1);
        assert_eq!(s.discretize(300.0).unwrap().rank(), 2);
        assert_eq!(s.discretize(549.999).unwrap().rank(), 2);
        assert_eq!(s.discretize(550.0).unwrap().rank(), 3);
        assert_eq!(s.discretize(2000.0).unwrap().rank(), 4);
    }

    #[test]
    fn cloud_height_examples() {
        let s = OrdinalScale::cloud_height();
        assert_eq!(s.num_classes(), 3);
        assert_eq!(s.discretize(1499.9).unwrap().rank(), 2);
        assert_eq!(s.discretize(1500.0).unwrap().rank(), 3);
        assert_eq!(s.discretize(-5.0).unwrap().rank(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        let s = OrdinalScale::rvr();
        assert!(matches!(s.discretize(f64::NAN), Err(Error::NonFiniteValue(_))));
        assert!(s.discretize(f64::INFINITY).is_err());
        assert!(OrdinalScale::new(vec![]).is_err());
        assert!(OrdinalScale::new(vec![1.0, 1.0]).is_err());
        assert!(OrdinalScale::new(vec![2.0, 1.0]).is_err());
        assert!(OrdinalLabel::new(0, 3).is_err());
        assert!(OrdinalLabel::new(4, 3).is_err());
    }

    #[test]
    fn scale_serde_validates() {
        assert!(serde_json::from_str::<OrdinalScale>("[3.0, 1.0]").is_err());
        let s: OrdinalScale = serde_json::from_str("[200.0, 1500.0]").unwrap();
        assert_eq!(s, OrdinalScale::cloud_height());
    }

    proptest! {
        #[test]
        fn discretize_is_monotone(a in -5000.0f64..5000.0, b in -5000.0f64..5000.0) {
            let s = OrdinalScale::rvr();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(s.discretize(lo).unwrap() <= s.discretize(hi).unwrap());
        }
    }
}
