use serde::{Deserialize, Serialize};

use super::{Pattern, PatternError};
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t_ms: f64,
    pub x: f64,
    pub y: f64,
}

impl Keyframe {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Timed positions of the slipper moving along the poly-line at constant
/// speed. Keyframes land on every tick of the frame interval and on every
/// dot, so the chord between consecutive keyframes is always arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlipperSchedule {
    pub keyframes: Vec<Keyframe>,
    pub total_duration_ms: f64,
}

/// Ticks closer than this to a dot time are merged into the dot keyframe.
const MERGE_EPS_MS: f64 = 1e-6;

pub fn slipper_schedule(
    pattern: &Pattern,
    frame_interval_ms: f64,
) -> Result<SlipperSchedule, PatternError> {
    if !(frame_interval_ms.is_finite() && frame_interval_ms > 0.0) {
        return Err(PatternError::InvalidConfig(format!(
            "frame interval must be positive, got {frame_interval_ms}"
        )));
    }
    let dots = &pattern.dots;
    let dot_times = SlipperSchedule::dot_times(pattern);
    let total = *dot_times.last().expect("pattern has dots");

    let mut times: Vec<f64> = dot_times.clone();
    let mut k = 1u64;
    loop {
        let t = k as f64 * frame_interval_ms;
        if t >= total - MERGE_EPS_MS {
            break;
        }
        if dot_times.iter().all(|d| (d - t).abs() > MERGE_EPS_MS) {
            times.push(t);
        }
        k += 1;
    }
    times.sort_by(f64::total_cmp);

    let keyframes = times
        .into_iter()
        .map(|t| {
            let p = position_on(dots, &dot_times, t);
            Keyframe { t_ms: t, x: p.x, y: p.y }
        })
        .collect();
    Ok(SlipperSchedule {
        keyframes,
        total_duration_ms: total,
    })
}

fn position_on(dots: &[Point], dot_times: &[f64], t: f64) -> Point {
    if t <= 0.0 {
        return dots[0];
    }
    let last = dot_times.len() - 1;
    if t >= dot_times[last] {
        return dots[last];
    }
    let seg = dot_times.partition_point(|&d| d <= t) - 1;
    let span = dot_times[seg + 1] - dot_times[seg];
    dots[seg].lerp(dots[seg + 1], (t - dot_times[seg]) / span)
}

impl SlipperSchedule {
    /// Slipper position at `t_ms`, clamped to the ends of the poly-line.
    pub fn position_at(&self, t_ms: f64) -> Point {
        let frames = &self.keyframes;
        if t_ms <= frames[0].t_ms {
            return frames[0].position();
        }
        let last = frames.len() - 1;
        if t_ms >= frames[last].t_ms {
            return frames[last].position();
        }
        let i = frames.partition_point(|k| k.t_ms <= t_ms) - 1;
        let (a, b) = (&frames[i], &frames[i + 1]);
        a.position()
            .lerp(b.position(), (t_ms - a.t_ms) / (b.t_ms - a.t_ms))
    }

    /// Times at which the slipper reaches each dot, in order.
    pub fn dot_times(pattern: &Pattern) -> Vec<f64> {
        let ms_per_px = 1000.0 / pattern.speed;
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for len in &pattern.segment_lengths {
            acc += len;
            out.push(acc * ms_per_px);
        }
        out
    }
}
