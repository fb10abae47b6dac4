//! Synthetic eye frames: anti-aliased discs on a flat background.
//!
//! Pixel `(i, j)` covers the unit square centred on the coordinate `(i, j)`,
//! matching the locator's sampling convention.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use super::{Frame, IrisError};
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
    pub level: u8,
}

const SUPERSAMPLE: usize = 8;

/// Fraction of the pixel at `(i, j)` covered by the disc.
fn coverage(i: f64, j: f64, c: Point, r: f64) -> f64 {
    let d = ((i - c.x).powi(2) + (j - c.y).powi(2)).sqrt();
    if d <= r - 0.75 {
        return 1.0;
    }
    if d >= r + 0.75 {
        return 0.0;
    }
    let step = 1.0 / SUPERSAMPLE as f64;
    let mut inside = 0usize;
    for a in 0..SUPERSAMPLE {
        for b in 0..SUPERSAMPLE {
            let x = i - 0.5 + (a as f64 + 0.5) * step;
            let y = j - 0.5 + (b as f64 + 0.5) * step;
            if (x - c.x).powi(2) + (y - c.y).powi(2) <= r * r {
                inside += 1;
            }
        }
    }
    inside as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64
}

/// Renders `discs` in order over a `background` fill and adds Gaussian
/// pixel noise of standard deviation `noise_sigma`.
pub fn render<R: Rng + ?Sized>(
    width: u32,
    height: u32,
    background: u8,
    discs: &[Disc],
    noise_sigma: f64,
    t_ms: f64,
    rng: &mut R,
) -> Result<Frame, IrisError> {
    let mut buf = vec![f64::from(background); width as usize * height as usize];
    for disc in discs {
        let lo_x = (disc.center.x - disc.radius - 1.0).floor().max(0.0) as usize;
        let hi_x = ((disc.center.x + disc.radius + 1.0).ceil().max(0.0) as usize).min(width as usize - 1);
        let lo_y = (disc.center.y - disc.radius - 1.0).floor().max(0.0) as usize;
        let hi_y = ((disc.center.y + disc.radius + 1.0).ceil().max(0.0) as usize).min(height as usize - 1);
        for j in lo_y..=hi_y {
            for i in lo_x..=hi_x {
                let a = coverage(i as f64, j as f64, disc.center, disc.radius);
                if a > 0.0 {
                    let px = &mut buf[j * width as usize + i];
                    *px = (1.0 - a) * *px + a * f64::from(disc.level);
                }
            }
        }
    }
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma)
            .map_err(|e| IrisError::Config(format!("noise sigma: {e}")))?;
        for px in &mut buf {
            *px += normal.sample(rng);
        }
    }
    let pixels = buf.into_iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    Frame::new(width, height, pixels, t_ms)
}

/// A single dark iris disc on a bright background, without noise.
pub fn disc_frame(width: u32, height: u32, center: Point, radius: f64, t_ms: f64) -> Frame {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    render(
        width,
        height,
        220,
        &[Disc {
            center,
            radius,
            level: 30,
        }],
        0.0,
        t_ms,
        &mut rng,
    )
    .expect("valid synthetic frame")
}

/// Frame of i.i.d. uniform pixel intensities.
pub fn uniform_noise_frame<R: Rng + ?Sized>(width: u32, height: u32, rng: &mut R) -> Frame {
    let pixels = (0..width as usize * height as usize).map(|_| rng.random()).collect();
    Frame::new(width, height, pixels, 0.0).expect("valid noise frame")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_is_dark_inside_and_bright_outside() {
        let f = disc_frame(120, 100, Point::new(60.0, 50.0), 20.0, 0.0);
        assert_eq!(f.get(60, 50), 30);
        assert_eq!(f.get(5, 5), 220);
        let edge = f.get(80, 50);
        assert!(edge > 30 && edge < 220, "edge pixel {edge}");
    }

    #[test]
    fn disc_area_matches_pi_r_squared() {
        let f = disc_frame(100, 100, Point::new(50.3, 49.6), 17.5, 0.0);
        let covered: f64 = f.pixels().iter().map(|&p| (220.0 - f64::from(p)) / 190.0).sum();
        let area = std::f64::consts::PI * 17.5 * 17.5;
        assert!((covered - area).abs() / area < 0.01, "{covered} vs {area}");
    }
}
