//! Iris localization in grayscale frames and conversion of frame streams
//! into timestamped trajectories.

mod daugman;
mod frame;
pub mod synth;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use daugman::{
    calibrate_confidence_floor, darkest_blob_roi, daugman_locate, operator_score, radius_grid,
    IrisFix, LocatorConfig, DEFAULT_CONFIDENCE_FLOOR,
};
pub use frame::{Frame, FrameManifest, ManifestEntry, RegionOfInterest, MIN_FRAME_SIDE};

use crate::trajectory::TrackedPoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrisError {
    #[error("frame {width}x{height} is below the 16x16 minimum")]
    FrameTooSmall { width: u32, height: u32 },
    #[error("expected {expected} pixels, got {got}")]
    PixelCount { expected: usize, got: usize },
    #[error("ROI {roi:?} is not inside the {width}x{height} frame")]
    RoiOutsideFrame {
        roi: RegionOfInterest,
        width: u32,
        height: u32,
    },
    #[error("radius range [{r_min}, {r_max}] invalid: need 2 <= r_min <= r_max < {limit}")]
    RadiusRange { r_min: f64, r_max: f64, limit: f64 },
    #[error("locator config: {0}")]
    Config(String),
    #[error("PGM: {0}")]
    Pgm(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("io: {0}")]
    Io(String),
    #[error("frame timestamps must be non-decreasing (frame {0})")]
    FrameOrder(usize),
    #[error("{rois} ROIs supplied for {frames} frames")]
    RoiCount { rois: usize, frames: usize },
    #[error("only {have} frames had a confident fix, need {need}")]
    InsufficientEvidence { have: usize, need: usize },
}

/// Search windows for a frame sequence: one for all frames, or one each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoiPlan {
    Fixed(RegionOfInterest),
    PerFrame(Vec<RegionOfInterest>),
}

impl RoiPlan {
    fn get(&self, i: usize) -> RegionOfInterest {
        match self {
            RoiPlan::Fixed(r) => *r,
            RoiPlan::PerFrame(v) => v[i],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackConfig {
    pub locator: LocatorConfig,
    /// Fewest confident fixes accepted as a trajectory.
    pub min_points: usize,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            locator: LocatorConfig::default(),
            min_points: 6,
        }
    }
}

/// Locates the iris in every frame and keeps the confident fixes.
///
/// Frames sharing a timestamp contribute only their first confident fix.
/// Confidence is `score / (score + floor)`.
pub fn track_frames(
    frames: &[Frame],
    rois: &RoiPlan,
    cfg: &TrackConfig,
) -> Result<Vec<TrackedPoint>, IrisError> {
    if let RoiPlan::PerFrame(v) = rois {
        if v.len() != frames.len() {
            return Err(IrisError::RoiCount {
                rois: v.len(),
                frames: frames.len(),
            });
        }
    }
    if let Some(i) = (1..frames.len()).find(|&i| frames[i].t_ms < frames[i - 1].t_ms) {
        return Err(IrisError::FrameOrder(i));
    }
    let fixes = frames
        .par_iter()
        .enumerate()
        .map(|(i, f)| daugman_locate(f, &rois.get(i), &cfg.locator))
        .collect::<Result<Vec<_>, _>>()?;
    let floor = cfg.locator.confidence_floor;
    let mut out: Vec<TrackedPoint> = Vec::with_capacity(fixes.len());
    for fix in fixes.iter().filter(|f| !f.low_confidence) {
        if out.last().is_some_and(|p| p.t_ms >= fix.t_ms) {
            continue;
        }
        let confidence = if floor > 0.0 { fix.score / (fix.score + floor) } else { 1.0 };
        out.push(TrackedPoint::new(fix.t_ms, fix.center, confidence));
    }
    if out.len() < cfg.min_points.max(1) {
        return Err(IrisError::InsufficientEvidence {
            have: out.len(),
            need: cfg.min_points.max(1),
        });
    }
    Ok(out)
}
