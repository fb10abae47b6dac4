use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{bounding_box, Point};
use crate::iris::synth::{render, Disc};
use crate::iris::Frame;
use crate::trajectory::Trajectory;

/// Maps trajectory coordinates to frame pixels: `p * scale + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub width: u32,
    pub height: u32,
    pub scale: f64,
    pub offset: Point,
    pub background: u8,
    pub iris_level: u8,
}

impl FrameGeometry {
    /// Scales and centres `points` into a `width`×`height` frame, leaving
    /// `margin` px on every side.
    pub fn fit(points: &[Point], width: u32, height: u32, margin: f64) -> Self {
        let (lo, hi) = bounding_box(points).unwrap_or_default();
        let span_x = (hi.x - lo.x).max(1e-9);
        let span_y = (hi.y - lo.y).max(1e-9);
        let avail_x = f64::from(width) - 2.0 * margin;
        let avail_y = f64::from(height) - 2.0 * margin;
        let scale = (avail_x / span_x).min(avail_y / span_y);
        let mid = Point::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
        let centre = Point::new(f64::from(width) / 2.0, f64::from(height) / 2.0);
        Self {
            width,
            height,
            scale,
            offset: centre - mid * scale,
            background: 200,
            iris_level: 40,
        }
    }

    pub fn map(&self, p: Point) -> Point {
        p * self.scale + self.offset
    }

    pub fn unmap(&self, p: Point) -> Point {
        (p - self.offset) * (1.0 / self.scale)
    }
}

/// One frame per trajectory sample with a dark iris disc at the mapped
/// position, plus optional Gaussian pixel noise.
pub fn render_frames<R: Rng + ?Sized>(
    traj: &Trajectory,
    geometry: &FrameGeometry,
    iris_radius: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<Vec<Frame>, SimError> {
    let (w, h) = (f64::from(geometry.width), f64::from(geometry.height));
    traj.points()
        .iter()
        .map(|p| {
            let c = geometry.map(p.position());
            let inside = c.x >= iris_radius
                && c.y >= iris_radius
                && c.x <= w - 1.0 - iris_radius
                && c.y <= h - 1.0 - iris_radius;
            if !inside {
                return Err(SimError::OutOfFrame {
                    t_ms: p.t_ms,
                    x: c.x,
                    y: c.y,
                });
            }
            let disc = Disc {
                center: c,
                radius: iris_radius,
                level: geometry.iris_level,
            };
            render(
                geometry.width,
                geometry.height,
                geometry.background,
                &[disc],
                noise_sigma,
                p.t_ms,
                rng,
            )
            .map_err(|e| SimError::Render(e.to_string()))
        })
        .collect()
}

/// A frame with no iris, as seen during a blink.
pub fn render_blank(geometry: &FrameGeometry, t_ms: f64) -> Result<Frame, SimError> {
    Frame::filled(geometry.width, geometry.height, geometry.background, t_ms)
        .map_err(|e| SimError::Render(e.to_string()))
}
