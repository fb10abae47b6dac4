use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PatternError;

/// The six canonical interior angles, in degrees, a pattern may contain.
pub const ANGLE_SET: [u16; 6] = [30, 45, 60, 90, 120, 150];

/// Trackability weight per canonical angle: the observed fraction of trials
/// in which a human followed that angle within the cost threshold.
pub const DEFAULT_WEIGHTS: [f64; 6] = [0.766, 0.566, 0.766, 0.7, 0.8, 0.813];

pub(crate) fn angle_slot(theta: u16) -> Result<usize, PatternError> {
    ANGLE_SET
        .iter()
        .position(|&a| a == theta)
        .ok_or(PatternError::UnknownAngle(theta))
}

/// Weights for the canonical angles, keyed by degree in JSON
/// (`{"30":0.766,"45":0.566,...}`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<u16, f64>", into = "BTreeMap<u16, f64>")]
pub struct AngleWeights {
    weights: [f64; 6],
}

impl Default for AngleWeights {
    fn default() -> Self {
        Self {
            weights: DEFAULT_WEIGHTS,
        }
    }
}

impl AngleWeights {
    /// Weights in `ANGLE_SET` order. Rejects non-positive or non-finite entries.
    pub fn new(weights: [f64; 6]) -> Result<Self, PatternError> {
        for (&angle, &w) in ANGLE_SET.iter().zip(&weights) {
            if !(w.is_finite() && w > 0.0) {
                return Err(PatternError::InvalidWeight { angle, weight: w });
            }
        }
        Ok(Self { weights })
    }

    pub fn uniform() -> Self {
        Self { weights: [1.0; 6] }
    }

    pub fn weight(&self, theta: u16) -> Result<f64, PatternError> {
        Ok(self.weights[angle_slot(theta)?])
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn as_array(&self) -> &[f64; 6] {
        &self.weights
    }

    /// Selection probability of every canonical angle, in `ANGLE_SET` order.
    pub fn probabilities(&self) -> [f64; 6] {
        let total = self.total();
        self.weights.map(|w| w / total)
    }
}

impl TryFrom<BTreeMap<u16, f64>> for AngleWeights {
    type Error = PatternError;

    fn try_from(map: BTreeMap<u16, f64>) -> Result<Self, Self::Error> {
        if let Some(&extra) = map.keys().find(|k| !ANGLE_SET.contains(k)) {
            return Err(PatternError::UnknownAngle(extra));
        }
        let mut weights = [0.0; 6];
        for (slot, angle) in ANGLE_SET.iter().enumerate() {
            weights[slot] = *map.get(angle).ok_or(PatternError::MissingWeight(*angle))?;
        }
        Self::new(weights)
    }
}

impl From<AngleWeights> for BTreeMap<u16, f64> {
    fn from(w: AngleWeights) -> Self {
        ANGLE_SET.iter().copied().zip(w.weights).collect()
    }
}

/// Probability of choosing `theta` for the next angle: its weight over the
/// sum of all weights.
pub fn angle_probability(theta: u16, weights: &AngleWeights) -> Result<f64, PatternError> {
    Ok(weights.weight(theta)? / weights.total())
}

/// Allowed segment lengths in device-independent pixels, strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SegmentLengthSet {
    lengths: Vec<f64>,
}

impl Default for SegmentLengthSet {
    fn default() -> Self {
        Self {
            lengths: vec![150.0, 200.0, 250.0],
        }
    }
}

impl SegmentLengthSet {
    pub fn new(lengths: Vec<f64>) -> Result<Self, PatternError> {
        if lengths.is_empty() {
            return Err(PatternError::InvalidLengths("empty length set".into()));
        }
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(PatternError::InvalidLengths("lengths must be positive".into()));
        }
        if lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PatternError::InvalidLengths(
                "lengths must be strictly increasing".into(),
            ));
        }
        Ok(Self { lengths })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn shortest(&self) -> f64 {
        self.lengths[0]
    }
}

impl TryFrom<Vec<f64>> for SegmentLengthSet {
    type Error = PatternError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<SegmentLengthSet> for Vec<f64> {
    fn from(s: SegmentLengthSet) -> Self {
        s.lengths
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_weight_probabilities() {
        let w = AngleWeights::default();
        assert!((w.total() - 4.411).abs() < 1e-12);
        assert!((angle_probability(150, &w).unwrap() - 0.813 / 4.411).abs() < 1e-15);
        assert!((angle_probability(150, &w).unwrap() - 0.18431).abs() < 1e-5);
        assert!((angle_probability(45, &w).unwrap() - 0.12832).abs() < 1e-5);
    }

    #[test]
    fn uniform_weights_give_one_sixth() {
        let w = AngleWeights::uniform();
        for a in ANGLE_SET {
            assert!((angle_probability(a, &w).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_foreign_angle_and_bad_weights() {
        let w = AngleWeights::default();
        assert!(matches!(angle_probability(75, &w), Err(PatternError::UnknownAngle(75))));
        assert!(AngleWeights::new([0.766, 0.0, 0.766, 0.7, 0.8, 0.813]).is_err());
        assert!(AngleWeights::new([0.766, -0.1, 0.766, 0.7, 0.8, 0.813]).is_err());
    }

    #[test]
    fn weights_json_is_keyed_by_degree() {
        let json = serde_json::to_string(&AngleWeights::default()).unwrap();
        assert_eq!(
            json,
            r#"{"30":0.766,"45":0.566,"60":0.766,"90":0.7,"120":0.8,"150":0.813}"#
        );
        let back: AngleWeights = serde_json::from_str(&json).unwrap();
        assert_eq!(back, AngleWeights::default());
        assert!(serde_json::from_str::<AngleWeights>(r#"{"30":1.0}"#).is_err());
    }

    #[test]
    fn length_set_validation() {
        assert!(SegmentLengthSet::new(vec![]).is_err());
        assert!(SegmentLengthSet::new(vec![200.0, 150.0]).is_err());
        assert!(SegmentLengthSet::new(vec![150.0, 150.0]).is_err());
        assert!(SegmentLengthSet::new(vec![-1.0]).is_err());
        assert_eq!(SegmentLengthSet::default().len(), 3);
    }
}
