//! From a timestamped iris trajectory to the measured angles at the
//! pattern's dots.
//!
//! Each dot is located on the trajectory by splitting the recording in
//! proportion to the segment lengths. Three candidate positions are kept per
//! dot; the angle at every interior dot is voted over all 27 combinations of
//! candidates from it and its two neighbours.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{interior_angle_deg, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("trajectory needs at least 2 points, got {0}")]
    TooShort(usize),
    #[error("timestamps must be strictly increasing (point {0})")]
    NonIncreasingTime(usize),
    #[error("point {0} has a non-finite coordinate or timestamp")]
    NonFinite(usize),
    #[error("point {0} has negative confidence")]
    NegativeConfidence(usize),
    #[error("interpolation interval is degenerate ({t_m} ms .. {t_n} ms)")]
    DegenerateInterval { t_m: f64, t_n: f64 },
    #[error("{have} samples cannot support {dots} dots (need at least {need})")]
    InsufficientSamples { have: usize, need: usize, dots: usize },
    #[error("dot count {n} does not match {segments} segment lengths")]
    DotCountMismatch { n: usize, segments: usize },
    #[error("angle at dot {0} is unmeasurable (all candidate triples degenerate)")]
    Unmeasurable(usize),
    #[error("at least 3 dot estimates are needed to measure an angle")]
    TooFewDots,
}

/// One recorded iris position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint {
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl TrackedPoint {
    pub fn new(t_ms: f64, position: Point, confidence: f64) -> Self {
        Self {
            t_ms,
            x: position.x,
            y: position.y,
            confidence,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Deserialize)]
struct RawTrajectory {
    points: Vec<TrackedPoint>,
}

/// An ordered, validated sequence of tracked points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory")]
pub struct Trajectory {
    points: Vec<TrackedPoint>,
}

impl TryFrom<RawTrajectory> for Trajectory {
    type Error = TrajectoryError;
    fn try_from(raw: RawTrajectory) -> Result<Self, Self::Error> {
        Trajectory::new(raw.points)
    }
}

impl Trajectory {
    pub fn new(points: Vec<TrackedPoint>) -> Result<Self, TrajectoryError> {
        if points.len() < 2 {
            return Err(TrajectoryError::TooShort(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.t_ms.is_finite() && p.x.is_finite() && p.y.is_finite() && p.confidence.is_finite()) {
                return Err(TrajectoryError::NonFinite(i));
            }
            if p.confidence < 0.0 {
                return Err(TrajectoryError::NegativeConfidence(i));
            }
            if i > 0 && p.t_ms <= points[i - 1].t_ms {
                return Err(TrajectoryError::NonIncreasingTime(i));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[TrackedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point> {
        self.points.iter().map(TrackedPoint::position).collect()
    }

    pub fn start_ms(&self) -> f64 {
        self.points[0].t_ms
    }

    pub fn end_ms(&self) -> f64 {
        self.points[self.points.len() - 1].t_ms
    }

    /// Applies `f` to every position, keeping timestamps and confidences.
    pub fn map_positions(&self, f: impl Fn(Point) -> Point) -> Trajectory {
        Trajectory {
            points: self
                .points
                .iter()
                .map(|p| TrackedPoint::new(p.t_ms, f(p.position()), p.confidence))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interpolated {
    pub position: Point,
    /// `t_O` fell outside `[t_M, t_N]`.
    pub extrapolated: bool,
}

/// Position at `t_o` on the straight motion from `m` to `n`.
pub fn interpolate_at(
    m: &TrackedPoint,
    n: &TrackedPoint,
    t_o: f64,
) -> Result<Interpolated, TrajectoryError> {
    if !(n.t_ms > m.t_ms) {
        return Err(TrajectoryError::DegenerateInterval {
            t_m: m.t_ms,
            t_n: n.t_ms,
        });
    }
    let ratio = (t_o - m.t_ms) / (n.t_ms - m.t_ms);
    Ok(Interpolated {
        position: Point::new(m.x + ratio * (n.x - m.x), m.y + ratio * (n.y - m.y)),
        extrapolated: !(m.t_ms..=n.t_ms).contains(&t_o),
    })
}

/// How dot positions are read off the trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMode {
    /// Split the recording's duration in proportion to segment lengths and
    /// interpolate between the samples bracketing each dot time.
    #[default]
    Timestamp,
    /// Split the sample index range in proportion to segment lengths,
    /// rounding to the nearest sample; ignores timestamps.
    Index,
}

/// Where one pattern dot was found on the trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct DotEstimate {
    /// 1-based dot number.
    pub dot_index: usize,
    /// Predecessor, dot position, successor.
    pub candidates: [Point; 3],
    pub nominal_time_ms: f64,
    /// 0-based index of the sample the middle candidate is anchored on.
    pub sample_index: usize,
}

fn clamp_window(points: &[TrackedPoint], centre: usize, middle: Point) -> [Point; 3] {
    let last = points.len() - 1;
    [
        points[centre.saturating_sub(1)].position(),
        middle,
        points[(centre + 1).min(last)].position(),
    ]
}

pub fn recover_dots(
    traj: &Trajectory,
    segment_lengths: &[f64],
    n: usize,
    mode: RecoveryMode,
) -> Result<Vec<DotEstimate>, TrajectoryError> {
    if n != segment_lengths.len() + 1 || n < 2 {
        return Err(TrajectoryError::DotCountMismatch {
            n,
            segments: segment_lengths.len(),
        });
    }
    let pts = traj.points();
    let m = pts.len();
    if m < 3 * n {
        return Err(TrajectoryError::InsufficientSamples {
            have: m,
            need: 3 * n,
            dots: n,
        });
    }
    let total: f64 = segment_lengths.iter().sum();
    let (first, last) = (pts[0], pts[m - 1]);
    let mut out = Vec::with_capacity(n);
    out.push(DotEstimate {
        dot_index: 1,
        candidates: [first.position(); 3],
        nominal_time_ms: first.t_ms,
        sample_index: 0,
    });
    let mut prefix = 0.0;
    for i in 2..n {
        prefix += segment_lengths[i - 2];
        let frac = prefix / total;
        let est = match mode {
            RecoveryMode::Timestamp => {
                let t = first.t_ms + (last.t_ms - first.t_ms) * frac;
                let b = (pts.partition_point(|p| p.t_ms <= t) - 1).min(m - 2);
                let at = interpolate_at(&pts[b], &pts[b + 1], t)?;
                let c = if t - pts[b].t_ms <= pts[b + 1].t_ms - t { b } else { b + 1 };
                DotEstimate {
                    dot_index: i,
                    candidates: clamp_window(pts, c, at.position),
                    nominal_time_ms: t,
                    sample_index: c,
                }
            }
            RecoveryMode::Index => {
                let j = ((m as f64) * frac).round().clamp(1.0, m as f64) as usize;
                let c = j - 1;
                DotEstimate {
                    dot_index: i,
                    candidates: clamp_window(pts, c, pts[c].position()),
                    nominal_time_ms: pts[c].t_ms,
                    sample_index: c,
                }
            }
        };
        out.push(est);
    }
    out.push(DotEstimate {
        dot_index: n,
        candidates: [last.position(); 3],
        nominal_time_ms: last.t_ms,
        sample_index: m - 1,
    });
    Ok(out)
}

/// Votes the interior angle at `b` over all candidate combinations and
/// returns the most frequent whole-degree value. Ties go to the value
/// closest to the median of all votes, then to the smaller value.
pub fn vote_angle(a: &[Point; 3], b: &[Point; 3], c: &[Point; 3]) -> Option<f64> {
    let mut votes = Vec::with_capacity(27);
    for &pa in a {
        for &pb in b {
            for &pc in c {
                if let Some(deg) = interior_angle_deg(pa, pb, pc) {
                    votes.push(deg.round() as i32);
                }
            }
        }
    }
    if votes.is_empty() {
        return None;
    }
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    for &v in &votes {
        *counts.entry(v).or_default() += 1;
    }
    votes.sort_unstable();
    let k = votes.len();
    let median = if k % 2 == 1 {
        f64::from(votes[k / 2])
    } else {
        0.5 * f64::from(votes[k / 2 - 1] + votes[k / 2])
    };
    let top = *counts.values().max().expect("non-empty");
    counts
        .into_iter()
        .filter(|&(_, n)| n == top)
        .map(|(v, _)| v)
        .min_by(|x, y| {
            let dx = (f64::from(*x) - median).abs();
            let dy = (f64::from(*y) - median).abs();
            dx.total_cmp(&dy).then(x.cmp(y))
        })
        .map(f64::from)
}

/// Measured interior angle, in whole degrees, at each interior dot.
pub fn measure_angles(estimates: &[DotEstimate]) -> Result<Vec<f64>, TrajectoryError> {
    if estimates.len() < 3 {
        return Err(TrajectoryError::TooFewDots);
    }
    estimates
        .windows(3)
        .map(|w| {
            vote_angle(&w[0].candidates, &w[1].candidates, &w[2].candidates)
                .ok_or(TrajectoryError::Unmeasurable(w[1].dot_index))
        })
        .collect()
}
