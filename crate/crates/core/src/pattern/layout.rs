//! Geometric realization of an angle/length skeleton on the screen.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    bounding_box, point_segment_distance, segment_segment_distance, Point, Rect,
};

/// Direction of the heading change at a dot, as seen on screen (y down).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Turn {
    Left,
    Right,
}

/// Per-draw rejection tallies, reported when the layout budget runs out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutFailure {
    pub bounds: u32,
    pub clearance: u32,
}

/// Builds the dot chain for the given interior angles and segment lengths,
/// starting at `start` with the first segment pointing along `heading_rad`
/// (0 = east, positive = clockwise on screen).
pub fn realize(
    angles: &[u16],
    lengths: &[f64],
    start: Point,
    heading_rad: f64,
    turns: &[Turn],
) -> Vec<Point> {
    debug_assert_eq!(lengths.len(), angles.len() + 1);
    debug_assert_eq!(turns.len(), angles.len());
    let mut dots = Vec::with_capacity(lengths.len() + 1);
    dots.push(start);
    let mut heading = heading_rad;
    let mut at = start;
    for (i, &len) in lengths.iter().enumerate() {
        if i > 0 {
            let deflection = PI - f64::from(angles[i - 1]).to_radians();
            heading += match turns[i - 1] {
                Turn::Left => -deflection,
                Turn::Right => deflection,
            };
        }
        at = Point::new(at.x + len * heading.cos(), at.y + len * heading.sin());
        dots.push(at);
    }
    dots
}

/// Smallest distance between any dot and a segment not incident to it, and
/// between any two non-adjacent segments. `INFINITY` for a single segment.
pub fn min_clearance(dots: &[Point]) -> f64 {
    let segs = dots.len().saturating_sub(1);
    let mut best = f64::INFINITY;
    for (k, &dot) in dots.iter().enumerate() {
        for j in 0..segs {
            if j + 1 == k || j == k {
                continue;
            }
            best = best.min(point_segment_distance(dot, dots[j], dots[j + 1]));
        }
    }
    for i in 0..segs {
        for j in (i + 2)..segs {
            best = best.min(segment_segment_distance(
                dots[i],
                dots[i + 1],
                dots[j],
                dots[j + 1],
            ));
        }
    }
    best
}

/// Randomly places the skeleton inside `screen`.
///
/// Initial heading and every turn sign are drawn uniformly. The shape is
/// realized at the origin and the start dot is then drawn uniformly from the
/// translations that keep every dot on screen, which is the same
/// distribution as drawing the start uniformly and rejecting off-screen
/// layouts. Gives up after `attempts` tries.
pub fn layout_pattern<R: Rng + ?Sized>(
    angles: &[u16],
    lengths: &[f64],
    screen: Rect,
    clearance: f64,
    attempts: u32,
    rng: &mut R,
) -> Result<Vec<Point>, LayoutFailure> {
    assert_eq!(
        lengths.len(),
        angles.len() + 1,
        "a skeleton has one more segment than angles"
    );
    let mut failure = LayoutFailure::default();
    for _ in 0..attempts {
        let heading = rng.random_range(0.0..2.0 * PI);
        let turns: Vec<Turn> = angles
            .iter()
            .map(|_| if rng.random_bool(0.5) { Turn::Left } else { Turn::Right })
            .collect();
        let shape = realize(angles, lengths, Point::default(), heading, &turns);
        let (lo, hi) = bounding_box(&shape).expect("shape has dots");
        let slack_x = screen.width - (hi.x - lo.x);
        let slack_y = screen.height - (hi.y - lo.y);
        if slack_x < 0.0 || slack_y < 0.0 {
            failure.bounds += 1;
            continue;
        }
        if min_clearance(&shape) < clearance {
            failure.clearance += 1;
            continue;
        }
        let ux: f64 = rng.random();
        let uy: f64 = rng.random();
        let dots: Vec<Point> = shape
            .iter()
            .map(|p| {
                Point::new(
                    screen.x + (p.x - lo.x) + ux * slack_x,
                    screen.y + (p.y - lo.y) + uy * slack_y,
                )
            })
            .collect();
        if dots.iter().all(|&d| screen.contains(d)) {
            return Ok(dots);
        }
        failure.bounds += 1;
    }
    Err(failure)
}
