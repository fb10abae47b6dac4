//! Labelled genuine and attack trajectories for exercising the engine
//! without a camera or a human.

mod benchmark;
mod calibrate;
mod render;

use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{DecisionError, FaceBoxTrace, FaceSample};
use crate::geometry::Point;
use crate::pattern::{
    generate_pattern_with, goodness, realize, slipper_schedule, Pattern, PatternConfig, PatternError,
    SlipperSchedule, Turn, ANGLE_SET,
};
use crate::trajectory::{TrackedPoint, Trajectory, TrajectoryError};

pub use benchmark::{
    run_benchmark, AngleCountRow, AttackMix, BenchmarkConfig, BenchmarkOutcome, BenchmarkReport,
    Counts, KindSummary, TrialKind, TrialRecord,
};
pub use calibrate::{calibrate_turn_error, mean_angle_deviation, DeviationStats};
pub use render::{render_blank, render_frames, FrameGeometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid noise model: {0}")]
    Noise(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Face(#[from] DecisionError),
    #[error("sample at {t_ms} ms maps to ({x:.1}, {y:.1}), outside the frame")]
    OutOfFrame { t_ms: f64, x: f64, y: f64 },
    #[error("render: {0}")]
    Render(String),
    #[error("benchmark: {0}")]
    Benchmark(String),
}

/// How a simulated viewer's gaze departs from the slipper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GazeNoiseModel {
    /// Per-sample Gaussian positional noise, px.
    pub jitter_sigma: f64,
    /// Pursuit delay behind the slipper, ms.
    pub lag_ms: f64,
    /// Expected blinks per second.
    pub blink_rate: f64,
    /// Samples lost per blink, ms.
    pub blink_ms: f64,
    /// Peak overshoot past each corner along the incoming direction, px.
    pub corner_overshoot: f64,
    /// Mean amount by which the viewer's path widens each corner, degrees.
    pub turn_error_deg: f64,
    /// Spread of the widening between corners, degrees.
    pub turn_error_sd_deg: f64,
    /// Multiplier on jitter and turn error at 45° and 90° corners.
    pub hard_corner_scale: f64,
    /// Amplitude of slow head sway in the face trace, px.
    pub head_sway_px: f64,
    pub sample_rate: f64,
}

/// Time around a corner over which overshoot and hard-corner jitter apply.
pub const CORNER_WINDOW_MS: f64 = 150.0;

impl Default for GazeNoiseModel {
    /// Calibrated so that the mean per-angle deviation on generated patterns
    /// is close to 20°.
    fn default() -> Self {
        Self {
            jitter_sigma: 2.0,
            lag_ms: 20.0,
            blink_rate: 0.2,
            blink_ms: 150.0,
            corner_overshoot: 4.0,
            turn_error_deg: 16.5,
            turn_error_sd_deg: 3.0,
            hard_corner_scale: 1.25,
            head_sway_px: 2.0,
            sample_rate: 240.0,
        }
    }
}

impl GazeNoiseModel {
    /// Perfect pursuit, densely sampled so the recovered angles carry only
    /// quantization error.
    pub fn noiseless() -> Self {
        Self {
            jitter_sigma: 0.0,
            lag_ms: 0.0,
            blink_rate: 0.0,
            blink_ms: 0.0,
            corner_overshoot: 0.0,
            turn_error_deg: 0.0,
            turn_error_sd_deg: 0.0,
            hard_corner_scale: 1.0,
            head_sway_px: 0.0,
            sample_rate: 1000.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("jitter_sigma", self.jitter_sigma),
            ("lag_ms", self.lag_ms),
            ("blink_rate", self.blink_rate),
            ("blink_ms", self.blink_ms),
            ("corner_overshoot", self.corner_overshoot),
            ("turn_error_deg", self.turn_error_deg),
            ("turn_error_sd_deg", self.turn_error_sd_deg),
            ("hard_corner_scale", self.hard_corner_scale),
            ("head_sway_px", self.head_sway_px),
            ("sample_rate", self.sample_rate),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::Noise(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.sample_rate == 0.0 {
            return Err(SimError::Noise("sample_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn frame_interval_ms(&self) -> f64 {
        1000.0 / self.sample_rate
    }
}

struct Corner {
    t_ms: f64,
    incoming: Point,
    hard: bool,
}

fn is_hard(angle: u16) -> bool {
    matches!(angle, 45 | 90)
}

fn corners(pattern: &Pattern) -> Vec<Corner> {
    let times = SlipperSchedule::dot_times(pattern);
    (1..pattern.dots.len() - 1)
        .map(|i| {
            let d = pattern.dots[i] - pattern.dots[i - 1];
            let len = (d.x * d.x + d.y * d.y).sqrt();
            Corner {
                t_ms: times[i],
                incoming: d * (1.0 / len),
                hard: is_hard(pattern.angles[i - 1]),
            }
        })
        .collect()
}

/// The path the viewer actually traces: the pattern's segments, each corner
/// opened by a random amount, so later dots drift off the drawn ones.
fn traced_pattern<R: Rng + ?Sized>(pattern: &Pattern, noise: &GazeNoiseModel, rng: &mut R) -> Pattern {
    if noise.turn_error_deg <= 0.0 && noise.turn_error_sd_deg <= 0.0 {
        return pattern.clone();
    }
    let dots = &pattern.dots;
    let first = dots[1] - dots[0];
    let mut heading = first.y.atan2(first.x);
    let mut at = dots[0];
    let mut out = vec![at];
    for (i, &len) in pattern.segment_lengths.iter().enumerate() {
        if i > 0 {
            let angle = pattern.angles[i - 1];
            let (u, v) = (dots[i] - dots[i - 1], dots[i + 1] - dots[i]);
            let side = if u.x * v.y - u.y * v.x >= 0.0 { 1.0 } else { -1.0 };
            let scale = if is_hard(angle) { noise.hard_corner_scale } else { 1.0 };
            let mean = noise.turn_error_deg * scale;
            let widen = if noise.turn_error_sd_deg > 0.0 {
                Normal::new(mean, noise.turn_error_sd_deg).expect("positive sd").sample(rng)
            } else {
                mean
            };
            let widened = (f64::from(angle) + widen).clamp(1.0, 180.0);
            heading += side * (180.0 - widened).to_radians();
        }
        at = at + Point::new(heading.cos(), heading.sin()) * len;
        out.push(at);
    }
    Pattern {
        dots: out,
        ..pattern.clone()
    }
}

fn blink_intervals<R: Rng + ?Sized>(noise: &GazeNoiseModel, duration_ms: f64, rng: &mut R) -> Vec<(f64, f64)> {
    if noise.blink_rate <= 0.0 || noise.blink_ms <= 0.0 {
        return Vec::new();
    }
    let gap = Exp::new(noise.blink_rate / 1000.0).expect("positive rate");
    let mut out = Vec::new();
    let mut t = gap.sample(rng);
    while t <= duration_ms {
        out.push((t, t + noise.blink_ms));
        t += noise.blink_ms + gap.sample(rng);
    }
    out
}

fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Point {
    if sigma <= 0.0 {
        return Point::default();
    }
    let n = Normal::new(0.0, sigma).expect("positive sigma");
    Point::new(n.sample(rng), n.sample(rng))
}

/// Gaze sample times: the slipper schedule's keyframes, so the camera is
/// synchronised with the display and a sample falls on every dot.
fn sample_times(pattern: &Pattern, noise: &GazeNoiseModel) -> Result<(SlipperSchedule, Vec<f64>), SimError> {
    let schedule = slipper_schedule(pattern, noise.frame_interval_ms())?;
    let times = schedule.keyframes.iter().map(|k| k.t_ms).collect();
    Ok((schedule, times))
}

/// Gaze of a cooperating viewer following the slipper.
pub fn simulate_genuine<R: Rng + ?Sized>(
    pattern: &Pattern,
    noise: &GazeNoiseModel,
    rng: &mut R,
) -> Result<Trajectory, SimError> {
    simulate_genuine_session(pattern, noise, rng).map(|(t, _)| t)
}

/// Genuine gaze plus the face trace of a head held nearly still.
pub fn simulate_genuine_session<R: Rng + ?Sized>(
    pattern: &Pattern,
    noise: &GazeNoiseModel,
    rng: &mut R,
) -> Result<(Trajectory, FaceBoxTrace), SimError> {
    noise.validate()?;
    let traced = traced_pattern(pattern, noise, rng);
    let (schedule, times) = sample_times(&traced, noise)?;
    let corners = corners(&traced);
    let blinks = blink_intervals(noise, schedule.total_duration_ms, rng);
    let mut points = Vec::with_capacity(times.len());
    for &t in &times {
        let lagged = t - noise.lag_ms;
        let mut p = schedule.position_at(lagged);
        let mut sigma = noise.jitter_sigma;
        for c in &corners {
            let since = lagged - c.t_ms;
            if (0.0..CORNER_WINDOW_MS).contains(&since) {
                p = p + c.incoming * (noise.corner_overshoot * (PI * since / CORNER_WINDOW_MS).sin());
            }
            if c.hard && since.abs() < CORNER_WINDOW_MS {
                sigma = noise.jitter_sigma * noise.hard_corner_scale;
            }
        }
        let p = p + gaussian(sigma, rng);
        if blinks.iter().any(|&(a, b)| (a..b).contains(&t)) {
            continue;
        }
        points.push(TrackedPoint::new(t, p, 1.0));
    }
    let face = still_head_trace(pattern, &times, noise.head_sway_px, rng)?;
    Ok((Trajectory::new(points)?, face))
}

fn centroid(points: &[Point]) -> Point {
    let sum = points.iter().fold(Point::default(), |acc, &p| acc + p);
    sum * (1.0 / points.len() as f64)
}

pub const FACE_DIAGONAL_PX: f64 = 260.0;

fn still_head_trace<R: Rng + ?Sized>(
    pattern: &Pattern,
    times: &[f64],
    sway_px: f64,
    rng: &mut R,
) -> Result<FaceBoxTrace, SimError> {
    let base = centroid(&pattern.dots);
    let fx = rng.random_range(0.1..0.5);
    let fy = rng.random_range(0.1..0.5);
    let px = rng.random_range(0.0..2.0 * PI);
    let py = rng.random_range(0.0..2.0 * PI);
    let half = sway_px / 2.0;
    let samples = times
        .iter()
        .map(|&t| {
            let s = t / 1000.0;
            FaceSample {
                t_ms: t,
                x: base.x + half * (2.0 * PI * fx * s + px).sin(),
                y: base.y + half * (2.0 * PI * fy * s + py).sin(),
                diagonal: FACE_DIAGONAL_PX,
            }
        })
        .collect();
    Ok(FaceBoxTrace::new(samples)?)
}

/// What the replayed clip shows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    /// A clip of an independent angle draw on the target's segment lengths,
    /// so the clip's dots line up with the target's in time.
    #[default]
    Aligned,
    /// A clip of a fully independent pattern, time-stretched to the target's
    /// duration.
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayConfig {
    pub mode: ReplayMode,
    /// Parameters the attacker knows: angle set weights, lengths, speed.
    pub decoy: PatternConfig,
    /// Tracking noise in the recorded clip; `None` records perfect pursuit.
    pub clip_noise: Option<GazeNoiseModel>,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            mode: ReplayMode::Aligned,
            decoy: PatternConfig::default(),
            clip_noise: None,
        }
    }
}

pub struct ReplayTrial {
    pub trajectory: Trajectory,
    pub face: FaceBoxTrace,
    pub decoy: Pattern,
}

/// Angles drawn independently with the configured weights.
pub fn draw_angles<R: Rng + ?Sized>(count: usize, cfg: &PatternConfig, rng: &mut R) -> Vec<u16> {
    let pick = WeightedIndex::new(cfg.weights.as_array()).expect("validated weights");
    (0..count).map(|_| ANGLE_SET[pick.sample(rng)]).collect()
}

/// The gaze trajectory a pre-recorded clip produces when replayed against
/// `target`.
pub fn simulate_replay_attack<R: Rng + ?Sized>(
    target: &Pattern,
    cfg: &ReplayConfig,
    rng: &mut R,
) -> Result<ReplayTrial, SimError> {
    cfg.decoy.validate()?;
    let decoy = match cfg.mode {
        ReplayMode::Aligned => {
            let angles = draw_angles(target.angles.len(), &cfg.decoy, rng);
            let heading = rng.random_range(0.0..2.0 * PI);
            let turns: Vec<Turn> = angles
                .iter()
                .map(|_| if rng.random_bool(0.5) { Turn::Left } else { Turn::Right })
                .collect();
            let dots = realize(&angles, &target.segment_lengths, target.dots[0], heading, &turns);
            let g = goodness(
                &angles,
                angles.len() + 2,
                cfg.decoy.lengths.len(),
                &cfg.decoy.weights,
            )?;
            Pattern {
                seed: 0,
                speed: target.speed,
                dots,
                angles,
                segment_lengths: target.segment_lengths.clone(),
                goodness: g,
            }
        }
        ReplayMode::Independent => generate_pattern_with(&cfg.decoy, rng.random(), rng)?,
    };
    let noise = cfg.clip_noise.clone().unwrap_or_else(GazeNoiseModel::noiseless);
    let (clip, face) = simulate_genuine_session(&decoy, &noise, rng)?;
    let stretch = target.duration_ms() / decoy.duration_ms();
    let (trajectory, face) = if (stretch - 1.0).abs() > 1e-12 {
        let pts = clip
            .points()
            .iter()
            .map(|p| TrackedPoint { t_ms: p.t_ms * stretch, ..*p })
            .collect();
        let samples = face
            .samples()
            .iter()
            .map(|s| FaceSample { t_ms: s.t_ms * stretch, ..*s })
            .collect();
        (Trajectory::new(pts)?, FaceBoxTrace::new(samples)?)
    } else {
        (clip, face)
    };
    Ok(ReplayTrial {
        trajectory,
        face,
        decoy,
    })
}

/// A printed photo (or rigid model) moved so its eyes trace the pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhotoAttack {
    /// Share of the eye motion produced by moving the whole face: 1 for a
    /// rigid photo, below 1 for a hybrid where the eyes also move.
    pub face_fraction: f64,
    /// Bound on independent sensor noise of each iris and face sample, px.
    pub sensor_noise_px: f64,
    /// Hold the photo motionless instead of tracing the pattern.
    pub still: bool,
    pub lag_ms: f64,
    pub sample_rate: f64,
}

impl Default for PhotoAttack {
    fn default() -> Self {
        Self {
            face_fraction: 1.0,
            sensor_noise_px: 1.0,
            still: false,
            lag_ms: 100.0,
            sample_rate: 30.0,
        }
    }
}

fn disc_noise<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    if radius <= 0.0 {
        return Point::default();
    }
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..2.0 * PI);
    Point::new(r * a.cos(), r * a.sin())
}

/// Offset from the iris to the face-box centre in an upright face.
const FACE_FROM_IRIS: Point = Point { x: 40.0, y: 60.0 };

pub fn simulate_photo_attack<R: Rng + ?Sized>(
    pattern: &Pattern,
    attack: &PhotoAttack,
    rng: &mut R,
) -> Result<(Trajectory, FaceBoxTrace), SimError> {
    if !(0.0..=1.0).contains(&attack.face_fraction) || !(attack.sensor_noise_px >= 0.0) {
        return Err(SimError::Noise("face_fraction must be in [0, 1] and noise non-negative".into()));
    }
    let noise = GazeNoiseModel {
        lag_ms: attack.lag_ms,
        sample_rate: attack.sample_rate,
        ..GazeNoiseModel::noiseless()
    };
    noise.validate()?;
    let (schedule, times) = sample_times(pattern, &noise)?;
    let origin = pattern.dots[0];
    let mut points = Vec::with_capacity(times.len());
    let mut samples = Vec::with_capacity(times.len());
    for &t in &times {
        let (iris, face) = if attack.still {
            (origin, origin + FACE_FROM_IRIS)
        } else {
            let path = schedule.position_at(t - attack.lag_ms);
            let moved = (path - origin) * attack.face_fraction;
            (
                path + disc_noise(attack.sensor_noise_px, rng),
                origin + moved + FACE_FROM_IRIS + disc_noise(attack.sensor_noise_px, rng),
            )
        };
        points.push(TrackedPoint::new(t, iris, 1.0));
        samples.push(FaceSample {
            t_ms: t,
            x: face.x,
            y: face.y,
            diagonal: FACE_DIAGONAL_PX,
        });
    }
    Ok((Trajectory::new(points)?, FaceBoxTrace::new(samples)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::{evaluate, DecisionConfig, Reason};
    use crate::pattern::generate_pattern;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pattern(seed: u64) -> Pattern {
        generate_pattern(&PatternConfig::default(), seed).unwrap()
    }

    #[test]
    fn noiseless_genuine_recovers_exact_angles() {
        let cfg = DecisionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..40 {
            let p = pattern(seed);
            let (t, f) = simulate_genuine_session(&p, &GazeNoiseModel::noiseless(), &mut rng).unwrap();
            let v = evaluate(&p, &t, Some(&f), None, &cfg);
            assert_eq!(v.reason, Reason::CostPass, "{v:?}");
            assert!(v.cost_deg.unwrap() <= 1.0, "{v:?}");
        }
    }

    #[test]
    fn genuine_is_deterministic_per_seed() {
        let p = pattern(3);
        let a = simulate_genuine(&p, &GazeNoiseModel::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = simulate_genuine(&p, &GazeNoiseModel::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn heavy_blinking_starves_recovery() {
        let p = pattern(4);
        let noise = GazeNoiseModel {
            blink_rate: 50.0,
            blink_ms: 400.0,
            sample_rate: 30.0,
            ..GazeNoiseModel::noiseless()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        match simulate_genuine(&p, &noise, &mut rng) {
            Ok(t) => {
                let v = evaluate(&p, &t, None, None, &DecisionConfig::default());
                assert_eq!(v.reason, Reason::InsufficientEvidence);
            }
            Err(e) => assert!(matches!(e, SimError::Trajectory(TrajectoryError::TooShort(_)))),
        }
    }

    #[test]
    fn replaying_the_target_itself_passes() {
        let p = pattern(5);
        let (clip, face) =
            simulate_genuine_session(&p, &GazeNoiseModel::noiseless(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let v = evaluate(&p, &clip, Some(&face), None, &DecisionConfig::default());
        assert!(v.live);
    }

    #[test]
    fn aligned_replay_measures_decoy_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = DecisionConfig::default();
        for seed in 0..30 {
            let p = pattern(seed);
            let trial = simulate_replay_attack(&p, &ReplayConfig::default(), &mut rng).unwrap();
            let expected = crate::decision::matching_cost(
                &p.angles,
                &trial.decoy.angles.iter().map(|&a| f64::from(a)).collect::<Vec<_>>(),
                &cfg.weights,
            )
            .unwrap();
            let v = evaluate(&p, &trial.trajectory, Some(&trial.face), None, &cfg);
            assert!((v.cost_deg.unwrap() - expected).abs() < 1e-9, "{v:?} vs {expected}");
        }
    }

    #[test]
    fn independent_replay_is_stretched_to_target_duration() {
        let p = pattern(6);
        let cfg = ReplayConfig {
            mode: ReplayMode::Independent,
            ..ReplayConfig::default()
        };
        let trial = simulate_replay_attack(&p, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((trial.trajectory.end_ms() - p.duration_ms()).abs() < 1e-6);
    }

    #[test]
    fn photo_attacks() {
        let p = pattern(7);
        let cfg = DecisionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (t, f) = simulate_photo_attack(&p, &PhotoAttack::default(), &mut rng).unwrap();
        assert_eq!(evaluate(&p, &t, Some(&f), None, &cfg).reason, Reason::FaceMotion);

        let still = PhotoAttack {
            still: true,
            ..PhotoAttack::default()
        };
        let (t, f) = simulate_photo_attack(&p, &still, &mut rng).unwrap();
        let v = evaluate(&p, &t, Some(&f), None, &cfg);
        assert!(matches!(v.reason, Reason::Unmeasurable | Reason::Timeout), "{v:?}");
    }

    #[test]
    fn hybrid_photo_ratio_matches_construction() {
        let p = pattern(8);
        let cfg = DecisionConfig::default();
        for f in [0.25, 0.5, 0.75] {
            let attack = PhotoAttack {
                face_fraction: f,
                sensor_noise_px: 0.0,
                ..PhotoAttack::default()
            };
            let (t, face) = simulate_photo_attack(&p, &attack, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let m = crate::decision::FaceMotion::measure(&face, &t);
            let expected = f / (1.0 - f);
            assert!((m.ratio() - expected).abs() < 1e-9, "f={f}: {} vs {expected}", m.ratio());
            let v = evaluate(&p, &t, Some(&face), None, &cfg);
            assert_eq!(v.reason == Reason::FaceMotion, m.ratio() > cfg.face_ratio_threshold);
        }
    }

    #[test]
    fn noise_model_validation() {
        let bad = GazeNoiseModel {
            sample_rate: 0.0,
            ..GazeNoiseModel::default()
        };
        assert!(bad.validate().is_err());
        let bad = GazeNoiseModel {
            jitter_sigma: -1.0,
            ..GazeNoiseModel::default()
        };
        assert!(bad.validate().is_err());
    }
}
