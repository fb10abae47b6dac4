//! Integrodifferential iris locator.
//!
//! For a candidate centre `(x0, y0)` the mean intensity on the circle of
//! radius `r` is `M(r)`. The operator response is the largest
//! `|G_sigma * dM/dr|` over the radius range; the fix is the centre and radius
//! maximizing it.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Frame, IrisError, RegionOfInterest};
use crate::geometry::Point;

/// Operator response below which a fix is flagged low-confidence. Chosen by
/// [`calibrate_confidence_floor`] so that at least 99% of uniform-noise
/// 64×64 windows searched over radii 8–16 fall below it.
pub const DEFAULT_CONFIDENCE_FLOOR: f64 = 16.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocatorConfig {
    pub r_min: f64,
    pub r_max: f64,
    /// Gaussian smoothing width, px of radius.
    pub sigma: f64,
    /// Radius grid spacing and derivative step, px.
    pub radial_step: f64,
    /// Points sampled on each circle.
    pub samples: usize,
    pub coarse_stride: u32,
    /// Coarse centres kept for refinement.
    pub coarse_keep: usize,
    /// Evaluate every centre instead of coarse-to-fine.
    pub exhaustive: bool,
    /// Parabolic sub-pixel refinement of centre and radius.
    pub subpixel: bool,
    /// Skip the top and bottom 45° arcs of every circle.
    pub exclude_eyelids: bool,
    pub confidence_floor: f64,
}

impl Default for LocatorConfig {
    fn default() -> Self {
        Self {
            r_min: 8.0,
            r_max: 16.0,
            sigma: 1.0,
            radial_step: 1.0,
            samples: 64,
            coarse_stride: 4,
            coarse_keep: 3,
            exhaustive: false,
            subpixel: true,
            exclude_eyelids: false,
            confidence_floor: DEFAULT_CONFIDENCE_FLOOR,
        }
    }
}

impl LocatorConfig {
    pub fn with_radii(r_min: f64, r_max: f64) -> Self {
        Self {
            r_min,
            r_max,
            ..Self::default()
        }
    }

    pub fn validate(&self, roi: &RegionOfInterest) -> Result<(), IrisError> {
        let limit = f64::from(roi.w.min(roi.h)) / 2.0;
        if !(self.r_min >= 2.0 && self.r_min <= self.r_max && self.r_max < limit) {
            return Err(IrisError::RadiusRange {
                r_min: self.r_min,
                r_max: self.r_max,
                limit,
            });
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(IrisError::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.radial_step > 0.0 && self.radial_step.is_finite()) {
            return Err(IrisError::Config(format!(
                "radial_step must be positive, got {}",
                self.radial_step
            )));
        }
        if self.samples < 8 {
            return Err(IrisError::Config("at least 8 circle samples are required".into()));
        }
        if self.coarse_stride == 0 || self.coarse_keep == 0 {
            return Err(IrisError::Config("coarse stride and keep must be positive".into()));
        }
        if !(self.confidence_floor >= 0.0) {
            return Err(IrisError::Config("confidence floor must be non-negative".into()));
        }
        Ok(())
    }
}

/// Result of one locator call, in frame coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrisFix {
    pub center: Point,
    pub radius: f64,
    pub score: f64,
    pub t_ms: f64,
    pub low_confidence: bool,
}

/// ROI pixels as floats, sampled with edge clamping.
struct Patch {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Patch {
    fn new(frame: &Frame, roi: &RegionOfInterest) -> Self {
        let (w, h) = (roi.w as usize, roi.h as usize);
        let mut data = Vec::with_capacity(w * h);
        for y in roi.y..roi.y + roi.h {
            for x in roi.x..roi.x + roi.w {
                data.push(f64::from(frame.get(x, y)));
            }
        }
        Self { w, h, data }
    }

    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.w - 1);
        let y1 = (y0 + 1).min(self.h - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let row0 = y0 * self.w;
        let row1 = y1 * self.w;
        let top = self.data[row0 + x0] * (1.0 - fx) + self.data[row0 + x1] * fx;
        let bottom = self.data[row1 + x0] * (1.0 - fx) + self.data[row1 + x1] * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

const HALF_KERNEL: usize = 2;
/// Extra radii needed on each side: derivative (1) plus smoothing (2).
const PAD: usize = HALF_KERNEL + 1;

/// Precomputed circle offsets and smoothing kernel for one configuration.
struct Operator {
    step: f64,
    r_min: f64,
    n_radii: usize,
    /// `offsets[j]` holds the circle points for radius index `j - PAD`.
    offsets: Vec<Vec<(f64, f64)>>,
    kernel: [f64; 2 * HALF_KERNEL + 1],
}

impl Operator {
    fn new(cfg: &LocatorConfig) -> Self {
        let step = cfg.radial_step;
        let n_radii = ((cfg.r_max - cfg.r_min) / step + 1e-9).floor() as usize + 1;
        let angles: Vec<f64> = (0..cfg.samples)
            .map(|k| 2.0 * PI * k as f64 / cfg.samples as f64)
            .filter(|phi| !cfg.exclude_eyelids || phi.sin().abs() <= (PI / 8.0).cos())
            .collect();
        let offsets = (0..n_radii + 2 * PAD)
            .map(|j| {
                let r = (cfg.r_min + (j as f64 - PAD as f64) * step).abs();
                angles.iter().map(|phi| (r * phi.cos(), r * phi.sin())).collect()
            })
            .collect();
        let mut kernel = [0.0; 2 * HALF_KERNEL + 1];
        for (i, k) in kernel.iter_mut().enumerate() {
            let d = (i as f64 - HALF_KERNEL as f64) * step;
            *k = (-d * d / (2.0 * cfg.sigma * cfg.sigma)).exp();
        }
        let total: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= total);
        Self {
            step,
            r_min: cfg.r_min,
            n_radii,
            offsets,
            kernel,
        }
    }

    fn radius(&self, i: usize) -> f64 {
        self.r_min + i as f64 * self.step
    }

    /// `|G * dM/dr|` at every radius of the grid.
    fn responses(&self, patch: &Patch, cx: f64, cy: f64) -> Vec<f64> {
        let means: Vec<f64> = self
            .offsets
            .iter()
            .map(|circle| {
                let sum: f64 = circle.iter().map(|&(dx, dy)| patch.bilinear(cx + dx, cy + dy)).sum();
                sum / circle.len() as f64
            })
            .collect();
        // deriv[j] is the derivative at offsets index j + 1.
        let deriv: Vec<f64> = means
            .windows(3)
            .map(|w| (w[2] - w[0]) / (2.0 * self.step))
            .collect();
        (0..self.n_radii)
            .map(|i| {
                self.kernel
                    .iter()
                    .zip(&deriv[i..i + self.kernel.len()])
                    .map(|(k, d)| k * d)
                    .sum::<f64>()
                    .abs()
            })
            .collect()
    }

    /// Best response over radii at one centre; ties go to the smaller radius.
    fn best(&self, patch: &Patch, cx: usize, cy: usize) -> Candidate {
        let resp = self.responses(patch, cx as f64, cy as f64);
        let mut r_idx = 0;
        for (i, &v) in resp.iter().enumerate() {
            if v > resp[r_idx] {
                r_idx = i;
            }
        }
        Candidate {
            score: resp[r_idx],
            x: cx,
            y: cy,
            r_idx,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    score: f64,
    x: usize,
    y: usize,
    r_idx: usize,
}

impl Candidate {
    /// Higher score first, then lowest `(y, x, r)`.
    fn rank(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.y.cmp(&other.y))
            .then(self.x.cmp(&other.x))
            .then(self.r_idx.cmp(&other.r_idx))
    }
}

fn pick(a: Candidate, b: Candidate) -> Candidate {
    if b.rank(&a) == Ordering::Less {
        b
    } else {
        a
    }
}

fn exhaustive_search(op: &Operator, patch: &Patch) -> Candidate {
    (0..patch.h)
        .into_par_iter()
        .map(|y| {
            (0..patch.w)
                .map(|x| op.best(patch, x, y))
                .reduce(pick)
                .expect("non-empty row")
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(pick)
        .expect("non-empty patch")
}

fn coarse_to_fine(op: &Operator, patch: &Patch, stride: usize, keep: usize) -> Candidate {
    let xs: Vec<usize> = (stride / 2..patch.w).step_by(stride).collect();
    let ys: Vec<usize> = (stride / 2..patch.h).step_by(stride).collect();
    let mut coarse: Vec<Candidate> = ys
        .par_iter()
        .flat_map_iter(|&y| xs.iter().map(move |&x| (x, y)))
        .map(|(x, y)| op.best(patch, x, y))
        .collect();
    coarse.sort_by(Candidate::rank);
    coarse.truncate(keep);
    coarse
        .iter()
        .flat_map(|c| {
            let x_lo = c.x.saturating_sub(stride);
            let x_hi = (c.x + stride).min(patch.w - 1);
            let y_lo = c.y.saturating_sub(stride);
            let y_hi = (c.y + stride).min(patch.h - 1);
            (y_lo..=y_hi).flat_map(move |y| (x_lo..=x_hi).map(move |x| (x, y)))
        })
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(x, y)| op.best(patch, x, y))
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(pick)
        .expect("refinement window non-empty")
}

/// Vertex offset of the parabola through `(-1, a)`, `(0, b)`, `(1, c)`,
/// limited to half a step.
fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom < 0.0 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

fn refine(op: &Operator, patch: &Patch, best: &Candidate) -> (f64, f64, f64) {
    let (x, y) = (best.x, best.y);
    let score_at = |cx: usize, cy: usize| op.best(patch, cx, cy).score;
    let dx = if x > 0 && x + 1 < patch.w {
        parabolic_offset(score_at(x - 1, y), best.score, score_at(x + 1, y))
    } else {
        0.0
    };
    let dy = if y > 0 && y + 1 < patch.h {
        parabolic_offset(score_at(x, y - 1), best.score, score_at(x, y + 1))
    } else {
        0.0
    };
    let resp = op.responses(patch, x as f64, y as f64);
    let i = best.r_idx;
    let dr = if i > 0 && i + 1 < resp.len() {
        parabolic_offset(resp[i - 1], resp[i], resp[i + 1]) * op.step
    } else {
        0.0
    };
    (x as f64 + dx, y as f64 + dy, op.radius(i) + dr)
}

/// Finds the iris in `roi` of `frame`.
///
/// A fix whose response is below `cfg.confidence_floor` is returned with
/// `low_confidence` set rather than as an error.
pub fn daugman_locate(
    frame: &Frame,
    roi: &RegionOfInterest,
    cfg: &LocatorConfig,
) -> Result<IrisFix, IrisError> {
    roi.check_inside(frame)?;
    cfg.validate(roi)?;
    let patch = Patch::new(frame, roi);
    let op = Operator::new(cfg);
    let best = if cfg.exhaustive {
        exhaustive_search(&op, &patch)
    } else {
        coarse_to_fine(&op, &patch, cfg.coarse_stride as usize, cfg.coarse_keep)
    };
    let (lx, ly, radius) = if cfg.subpixel {
        refine(&op, &patch, &best)
    } else {
        (best.x as f64, best.y as f64, op.radius(best.r_idx))
    };
    Ok(IrisFix {
        center: Point::new(f64::from(roi.x) + lx, f64::from(roi.y) + ly),
        radius: radius.clamp(cfg.r_min, cfg.r_max),
        score: best.score,
        t_ms: frame.t_ms,
        low_confidence: best.score < cfg.confidence_floor,
    })
}

/// Operator response at an integer centre (frame coordinates) and a radius
/// on the configured grid.
pub fn operator_score(
    frame: &Frame,
    roi: &RegionOfInterest,
    cfg: &LocatorConfig,
    x: u32,
    y: u32,
    r_idx: usize,
) -> Result<f64, IrisError> {
    roi.check_inside(frame)?;
    cfg.validate(roi)?;
    let op = Operator::new(cfg);
    if r_idx >= op.n_radii || x < roi.x || y < roi.y || x >= roi.x + roi.w || y >= roi.y + roi.h {
        return Err(IrisError::Config("candidate outside the search space".into()));
    }
    let patch = Patch::new(frame, roi);
    Ok(op.responses(&patch, f64::from(x - roi.x), f64::from(y - roi.y))[r_idx])
}

/// Radii searched by `cfg`, in grid order.
pub fn radius_grid(cfg: &LocatorConfig) -> Vec<f64> {
    let op = Operator::new(cfg);
    (0..op.n_radii).map(|i| op.radius(i)).collect()
}

/// Response level that a `quantile` share of `frames` falls below.
pub fn calibrate_confidence_floor(
    frames: &[Frame],
    cfg: &LocatorConfig,
    quantile: f64,
) -> Result<f64, IrisError> {
    if frames.is_empty() || !(0.0..=1.0).contains(&quantile) {
        return Err(IrisError::Config("need frames and a quantile in [0, 1]".into()));
    }
    let mut scores = frames
        .iter()
        .map(|f| daugman_locate(f, &f.full_roi(), cfg).map(|fix| fix.score))
        .collect::<Result<Vec<_>, _>>()?;
    scores.sort_by(f64::total_cmp);
    let idx = ((scores.len() - 1) as f64 * quantile).ceil() as usize;
    Ok(scores[idx])
}

/// Demo-only ROI guess: the `side`×`side` window with the darkest mean.
pub fn darkest_blob_roi(frame: &Frame, side: u32) -> RegionOfInterest {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let side = (side as usize).min(w).min(h);
    let mut integral = vec![0u64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u64;
        for x in 0..w {
            row += u64::from(frame.get(x as u32, y as u32));
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let window = |x: usize, y: usize| {
        integral[(y + side) * (w + 1) + x + side] + integral[y * (w + 1) + x]
            - integral[y * (w + 1) + x + side]
            - integral[(y + side) * (w + 1) + x]
    };
    let mut best = (u64::MAX, 0, 0);
    for y in 0..=h - side {
        for x in 0..=w - side {
            let s = window(x, y);
            if s < best.0 {
                best = (s, x, y);
            }
        }
    }
    RegionOfInterest::new(best.1 as u32, best.2 as u32, side as u32, side as u32)
}
