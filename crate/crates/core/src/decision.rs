//! Matching cost, threshold decision and the anti-spoofing defenses that
//! together turn a recorded trajectory into a [`Verdict`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{extent, Point};
use crate::pattern::{AngleWeights, Pattern, PatternError};
use crate::trajectory::{measure_angles, recover_dots, RecoveryMode, Trajectory, TrajectoryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("pattern has {pattern} angles but {measured} were measured")]
    LengthMismatch { pattern: usize, measured: usize },
    #[error("no angles to compare")]
    Empty,
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("face trace needs at least one sample")]
    EmptyFaceTrace,
    #[error("face trace timestamps must be strictly increasing (sample {0})")]
    FaceTraceOrder(usize),
    #[error("face trace sample {0} is not finite")]
    FaceTraceNonFinite(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    CostPass,
    CostFail,
    Timeout,
    InsufficientEvidence,
    FaceMotion,
    Unmeasurable,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Reason::CostPass => "cost_pass",
            Reason::CostFail => "cost_fail",
            Reason::Timeout => "timeout",
            Reason::InsufficientEvidence => "insufficient_evidence",
            Reason::FaceMotion => "face_motion",
            Reason::Unmeasurable => "unmeasurable",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub live: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_deg: Option<f64>,
    pub reason: Reason,
    #[serde(default)]
    pub details: String,
}

impl Verdict {
    /// A rejection that carries no cost.
    pub fn reject(reason: Reason, details: impl Into<String>) -> Self {
        debug_assert!(reason != Reason::CostPass);
        Self {
            live: false,
            cost_deg: None,
            reason,
            details: details.into(),
        }
    }

    fn with_detail(mut self, note: &str) -> Self {
        if !note.is_empty() {
            if !self.details.is_empty() {
                self.details.push_str("; ");
            }
            self.details.push_str(note);
        }
        self
    }
}

/// Weighted mean absolute deviation between the issued and measured angles,
/// each deviation weighted by the trackability of the issued angle.
pub fn matching_cost(
    pattern_angles: &[u16],
    measured_angles: &[f64],
    weights: &AngleWeights,
) -> Result<f64, DecisionError> {
    if pattern_angles.len() != measured_angles.len() {
        return Err(DecisionError::LengthMismatch {
            pattern: pattern_angles.len(),
            measured: measured_angles.len(),
        });
    }
    if pattern_angles.is_empty() {
        return Err(DecisionError::Empty);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&theta, &measured) in pattern_angles.iter().zip(measured_angles) {
        let w = weights.weight(theta)?;
        num += w * (f64::from(theta) - measured).abs();
        den += w;
    }
    Ok(num / den)
}

/// Live iff `cost <= c0`.
pub fn decide(cost: f64, c0: f64) -> Verdict {
    let live = cost <= c0;
    Verdict {
        live,
        cost_deg: Some(cost),
        reason: if live { Reason::CostPass } else { Reason::CostFail },
        details: String::new(),
    }
}

pub fn check_timeout(last_evidence_ms: f64, now_ms: f64, window_ms: f64) -> Option<Verdict> {
    let gap = now_ms - last_evidence_ms;
    (gap > window_ms).then(|| {
        Verdict::reject(
            Reason::Timeout,
            format!("no evidence for {gap:.0} ms (window {window_ms:.0} ms)"),
        )
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceSample {
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
    /// Diagonal of the face bounding box, px.
    pub diagonal: f64,
}

impl FaceSample {
    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Deserialize)]
struct RawFaceTrace {
    samples: Vec<FaceSample>,
}

/// Face bounding-box centers over time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFaceTrace")]
pub struct FaceBoxTrace {
    samples: Vec<FaceSample>,
}

impl TryFrom<RawFaceTrace> for FaceBoxTrace {
    type Error = DecisionError;
    fn try_from(raw: RawFaceTrace) -> Result<Self, Self::Error> {
        FaceBoxTrace::new(raw.samples)
    }
}

impl FaceBoxTrace {
    pub fn new(samples: Vec<FaceSample>) -> Result<Self, DecisionError> {
        if samples.is_empty() {
            return Err(DecisionError::EmptyFaceTrace);
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.t_ms.is_finite() && s.x.is_finite() && s.y.is_finite() && s.diagonal.is_finite()) {
                return Err(DecisionError::FaceTraceNonFinite(i));
            }
            if i > 0 && s.t_ms <= samples[i - 1].t_ms {
                return Err(DecisionError::FaceTraceOrder(i));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[FaceSample] {
        &self.samples
    }

    /// Face center at `t_ms`, linearly interpolated and held constant
    /// outside the recorded span.
    pub fn center_at(&self, t_ms: f64) -> Point {
        let s = &self.samples;
        if t_ms <= s[0].t_ms {
            return s[0].center();
        }
        let last = s.len() - 1;
        if t_ms >= s[last].t_ms {
            return s[last].center();
        }
        let i = s.partition_point(|p| p.t_ms <= t_ms) - 1;
        let u = (t_ms - s[i].t_ms) / (s[i + 1].t_ms - s[i].t_ms);
        s[i].center().lerp(s[i + 1].center(), u)
    }
}

/// Extents behind a face-motion check, in px.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceMotion {
    pub face_range: f64,
    pub iris_range: f64,
}

impl FaceMotion {
    pub fn measure(face: &FaceBoxTrace, iris: &Trajectory) -> Self {
        let centers: Vec<Point> = face.samples().iter().map(FaceSample::center).collect();
        let offsets: Vec<Point> = iris
            .points()
            .iter()
            .map(|p| p.position() - face.center_at(p.t_ms))
            .collect();
        Self {
            face_range: extent(&centers),
            iris_range: extent(&offsets),
        }
    }

    /// Face range over iris-in-face range; infinite when the eyes never
    /// move relative to the face.
    pub fn ratio(&self) -> f64 {
        if self.iris_range == 0.0 {
            if self.face_range == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.face_range / self.iris_range
        }
    }
}

/// Flags a trajectory produced by moving the whole face (a photo or model
/// dragged along the pattern) rather than the eyes. Faces that moved less
/// than `min_face_motion_px` never trigger.
pub fn check_face_motion(
    face: &FaceBoxTrace,
    iris: &Trajectory,
    ratio_threshold: f64,
    min_face_motion_px: f64,
) -> Option<Verdict> {
    let m = FaceMotion::measure(face, iris);
    if m.face_range < min_face_motion_px.max(f64::EPSILON) {
        return None;
    }
    let r = m.ratio();
    (r > ratio_threshold).then(|| {
        Verdict::reject(
            Reason::FaceMotion,
            format!(
                "face moved {:.1} px, iris within face {:.1} px (ratio {r:.2} > {ratio_threshold})",
                m.face_range, m.iris_range
            ),
        )
    })
}

/// Thresholds and options for [`evaluate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionConfig {
    pub c0_deg: f64,
    pub timeout_window_ms: f64,
    pub face_ratio_threshold: f64,
    pub min_face_motion_px: f64,
    pub recovery_mode: RecoveryMode,
    pub weights: AngleWeights,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            c0_deg: 25.0,
            timeout_window_ms: 5000.0,
            face_ratio_threshold: 1.0,
            min_face_motion_px: 5.0,
            recovery_mode: RecoveryMode::Timestamp,
            weights: AngleWeights::default(),
        }
    }
}

impl DecisionConfig {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            (self.c0_deg, "c0_deg"),
            (self.timeout_window_ms, "timeout_window_ms"),
            (self.face_ratio_threshold, "face_ratio_threshold"),
            (self.min_face_motion_px, "min_face_motion_px"),
        ];
        for (v, name) in checks {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if self.timeout_window_ms == 0.0 {
            return Err("timeout_window_ms must be positive".into());
        }
        Ok(())
    }
}

/// Longest stretch without evidence: between consecutive samples and, when
/// `now_ms` is given, after the last one.
fn evidence_gap(traj: &Trajectory, now_ms: Option<f64>) -> (f64, f64) {
    let pts = traj.points();
    let mut worst = (0.0, pts[0].t_ms);
    for w in pts.windows(2) {
        let gap = w[1].t_ms - w[0].t_ms;
        if gap > worst.0 {
            worst = (gap, w[0].t_ms);
        }
    }
    if let Some(now) = now_ms {
        let last = traj.end_ms();
        if now - last > worst.0 {
            worst = (now - last, last);
        }
    }
    worst
}

/// Full decision for one attempt: evidence and timeout checks, then the
/// face-motion defense, then angle recovery and the cost threshold.
pub fn evaluate(
    pattern: &Pattern,
    traj: &Trajectory,
    face: Option<&FaceBoxTrace>,
    now_ms: Option<f64>,
    cfg: &DecisionConfig,
) -> Verdict {
    let n = pattern.dot_count();
    if traj.len() < 3 * n {
        return Verdict::reject(
            Reason::InsufficientEvidence,
            format!("{} samples for {n} dots (need {})", traj.len(), 3 * n),
        );
    }
    let (gap, since) = evidence_gap(traj, now_ms);
    if let Some(v) = check_timeout(since, since + gap, cfg.timeout_window_ms) {
        return v;
    }

    let face_note = match face {
        Some(f) => {
            if let Some(v) = check_face_motion(f, traj, cfg.face_ratio_threshold, cfg.min_face_motion_px) {
                return v;
            }
            ""
        }
        None => "face-motion defense unavailable (no face trace)",
    };

    let measured = recover_dots(traj, &pattern.segment_lengths, n, cfg.recovery_mode)
        .and_then(|dots| measure_angles(&dots));
    let measured = match measured {
        Ok(m) => m,
        Err(TrajectoryError::InsufficientSamples { have, need, .. }) => {
            return Verdict::reject(
                Reason::InsufficientEvidence,
                format!("{have} samples, need {need}"),
            )
            .with_detail(face_note)
        }
        Err(e) => return Verdict::reject(Reason::Unmeasurable, e.to_string()).with_detail(face_note),
    };
    match matching_cost(&pattern.angles, &measured, &cfg.weights) {
        Ok(cost) => {
            let list: Vec<String> = measured.iter().map(|a| format!("{a:.0}")).collect();
            decide(cost, cfg.c0_deg)
                .with_detail(&format!("measured [{}]", list.join(", ")))
                .with_detail(face_note)
        }
        Err(e) => Verdict::reject(Reason::Unmeasurable, e.to_string()).with_detail(face_note),
    }
}
