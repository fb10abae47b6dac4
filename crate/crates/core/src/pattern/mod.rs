//! Random poly-line challenge generation.
//!
//! A pattern starts as one segment. Dots are appended while
//! [`is_next_dot_needed`] says so, each new dot contributing one angle drawn
//! from [`ANGLE_SET`] with probability proportional to its weight and one
//! segment length drawn uniformly from the configured set. A draw is kept
//! only if its [`goodness`] clears the floor and it can be laid out on the
//! screen without overlaps; otherwise the whole draw is repeated.

mod layout;
mod schedule;
mod weights;

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{interior_angle_deg, Point, Rect};

pub use layout::{layout_pattern, min_clearance, realize, LayoutFailure, Turn};
pub use schedule::{slipper_schedule, Keyframe, SlipperSchedule};
pub use weights::{angle_probability, AngleWeights, SegmentLengthSet, ANGLE_SET, DEFAULT_WEIGHTS};

/// Generator used for every seeded draw in this crate.
pub type PatternRng = ChaCha8Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatternError {
    #[error("angle {0} deg is not one of the canonical angles")]
    UnknownAngle(u16),
    #[error("missing weight for angle {0} deg")]
    MissingWeight(u16),
    #[error("weight for {angle} deg must be positive and finite, got {weight}")]
    InvalidWeight { angle: u16, weight: f64 },
    #[error("invalid segment lengths: {0}")]
    InvalidLengths(String),
    #[error("dot index {0} is out of domain (must be >= 3)")]
    DotIndex(usize),
    #[error("a pattern needs at least one angle")]
    NoAngles,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("pattern generation failed after {draws} draws; most frequent violation: {constraint} ({tally:?})")]
    GenerationFailed {
        constraint: Constraint,
        draws: u32,
        tally: RejectionTally,
    },
}

/// Acceptance constraints checked on every draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Goodness,
    Bounds,
    Clearance,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Goodness => "goodness",
            Constraint::Bounds => "bounds",
            Constraint::Clearance => "clearance",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionTally {
    pub goodness: u32,
    pub bounds: u32,
    pub clearance: u32,
}

impl RejectionTally {
    fn dominant(&self) -> Constraint {
        // Ties resolve in declaration order.
        let mut best = (Constraint::Goodness, self.goodness);
        for c in [(Constraint::Bounds, self.bounds), (Constraint::Clearance, self.clearance)] {
            if c.1 > best.1 {
                best = c;
            }
        }
        best.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    pub width: f64,
    pub height: f64,
}

impl Screen {
    pub fn rect(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width, self.height)
    }
}

impl Default for Screen {
    fn default() -> Self {
        Self {
            width: 1920.0,
            height: 1080.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternConfig {
    pub screen: Screen,
    pub weights: AngleWeights,
    pub lengths: SegmentLengthSet,
    /// Slipper speed in px/s.
    pub speed: f64,
    pub min_goodness: f64,
    /// Minimum distance between a dot and any non-incident segment, and
    /// between non-adjacent segments, in px.
    pub clearance: f64,
    pub layout_attempts: u32,
    pub max_draws: u32,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            screen: Screen::default(),
            weights: AngleWeights::default(),
            lengths: SegmentLengthSet::default(),
            speed: 500.0,
            min_goodness: 1.4,
            clearance: 20.0,
            layout_attempts: 64,
            max_draws: 1024,
        }
    }
}

impl PatternConfig {
    pub fn validate(&self) -> Result<(), PatternError> {
        let bad = |msg: String| Err(PatternError::InvalidConfig(msg));
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return bad(format!("speed must be positive, got {}", self.speed));
        }
        if !(self.screen.width > 0.0 && self.screen.height > 0.0) {
            return bad("screen dimensions must be positive".into());
        }
        if !(self.clearance >= 0.0) {
            return bad("clearance must be non-negative".into());
        }
        if !self.min_goodness.is_finite() {
            return bad("goodness floor must be finite".into());
        }
        if self.layout_attempts == 0 || self.max_draws == 0 {
            return bad("rejection budgets must be positive".into());
        }
        Ok(())
    }
}

/// A generated challenge.
///
/// Field order is part of the JSON contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub seed: u64,
    pub speed: f64,
    pub dots: Vec<Point>,
    pub angles: Vec<u16>,
    pub segment_lengths: Vec<f64>,
    pub goodness: f64,
}

impl Pattern {
    pub fn dot_count(&self) -> usize {
        self.dots.len()
    }

    pub fn total_length(&self) -> f64 {
        self.segment_lengths.iter().sum()
    }

    /// Time the slipper needs to traverse the whole poly-line.
    pub fn duration_ms(&self) -> f64 {
        1000.0 * self.total_length() / self.speed
    }

    /// Checks every structural invariant and returns a description of each
    /// violation found. Empty means the pattern is valid under `config`.
    pub fn violations(&self, config: &PatternConfig) -> Vec<String> {
        const TOL: f64 = 1e-6;
        let mut out = Vec::new();
        let n = self.dots.len();
        if n < 4 {
            out.push(format!("only {n} dots"));
        }
        if self.angles.len() + 2 != n || self.segment_lengths.len() + 1 != n {
            out.push("angle/length counts do not match dot count".into());
            return out;
        }
        if !(self.speed > 0.0) {
            out.push("non-positive speed".into());
        }
        for (i, w) in self.dots.windows(2).enumerate() {
            let d = w[0].distance(w[1]);
            if (d - self.segment_lengths[i]).abs() > TOL {
                out.push(format!("segment {i} measures {d}, stored {}", self.segment_lengths[i]));
            }
        }
        for (i, w) in self.dots.windows(3).enumerate() {
            let a = self.angles[i];
            if !ANGLE_SET.contains(&a) {
                out.push(format!("angle {a} not canonical"));
            }
            match interior_angle_deg(w[0], w[1], w[2]) {
                Some(m) if (m - f64::from(a)).abs() <= TOL => {}
                m => out.push(format!("angle at dot {} measures {m:?}, stored {a}", i + 1)),
            }
        }
        if self.goodness < config.min_goodness {
            out.push(format!("goodness {} below floor", self.goodness));
        }
        let screen = config.screen.rect();
        if let Some(p) = self.dots.iter().find(|&&p| !screen.contains(p)) {
            out.push(format!("dot {p:?} off screen"));
        }
        let c = min_clearance(&self.dots);
        if c < config.clearance {
            out.push(format!("clearance {c} below {}", config.clearance));
        }
        out
    }
}

/// Probability of appending the `k`-th dot given `k - 1` dots exist.
pub fn dot_addition_probability(k: usize) -> Result<f64, PatternError> {
    match k {
        0..=2 => Err(PatternError::DotIndex(k)),
        3 | 4 => Ok(1.0),
        _ => Ok(1.0 / (k - 3) as f64),
    }
}

/// Decision for dot `k` given a uniform draw in `[0, 1)`.
pub fn next_dot_decision(k: usize, draw: f64) -> Result<bool, PatternError> {
    Ok(draw <= dot_addition_probability(k)?)
}

pub fn is_next_dot_needed<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<bool, PatternError> {
    let p = dot_addition_probability(k)?;
    if p >= 1.0 {
        return Ok(true);
    }
    next_dot_decision(k, rng.random::<f64>())
}

/// Goodness of a skeleton: randomness (`6^(n-2) * |L|^(n-1)`) discounted by
/// tracking time (`e^-(n-1)`) and by how trackable its angles are.
pub fn goodness(
    angles: &[u16],
    n: usize,
    segment_set_size: usize,
    weights: &AngleWeights,
) -> Result<f64, PatternError> {
    if angles.is_empty() || n < 3 {
        return Err(PatternError::NoAngles);
    }
    if n != angles.len() + 2 {
        return Err(PatternError::InvalidConfig(format!(
            "{} angles imply {} dots, got n = {n}",
            angles.len(),
            angles.len() + 2
        )));
    }
    if segment_set_size == 0 {
        return Err(PatternError::InvalidLengths("empty length set".into()));
    }
    let mut g = 6f64.powi((n - 2) as i32)
        * (segment_set_size as f64).powi((n - 1) as i32)
        * (-((n - 1) as f64)).exp();
    for &a in angles {
        g *= angle_probability(a, weights)?;
    }
    Ok(g)
}

/// Angles and segment lengths of one raw draw, before any acceptance test.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub angles: Vec<u16>,
    pub lengths: Vec<f64>,
}

impl Skeleton {
    pub fn dot_count(&self) -> usize {
        self.lengths.len() + 1
    }
}

/// One pass of the inner generation loop: start from a single segment and
/// keep adding (angle, segment) pairs while the dot-addition law says so.
pub fn draw_skeleton<R: Rng + ?Sized>(config: &PatternConfig, rng: &mut R) -> Skeleton {
    let angle_dist =
        WeightedIndex::new(config.weights.as_array()).expect("validated weights are positive");
    let lengths = config.lengths.as_slice();
    let mut sk = Skeleton {
        angles: Vec::new(),
        lengths: vec![lengths[rng.random_range(0..lengths.len())]],
    };
    while is_next_dot_needed(sk.angles.len() + 3, rng).expect("k >= 3") {
        sk.angles.push(ANGLE_SET[angle_dist.sample(rng)]);
        sk.lengths.push(lengths[rng.random_range(0..lengths.len())]);
    }
    sk
}

/// Cheap check that at least one two-segment chain of the shortest length
/// fits on the screen, at any canonical angle and any whole-degree heading.
fn feasible(config: &PatternConfig) -> bool {
    let l = config.lengths.shortest();
    ANGLE_SET.iter().any(|&a| {
        (0..360).any(|h| {
            let dots = realize(
                &[a],
                &[l, l],
                Point::default(),
                f64::from(h).to_radians(),
                &[Turn::Left],
            );
            let (lo, hi) = crate::geometry::bounding_box(&dots).expect("non-empty");
            hi.x - lo.x <= config.screen.width && hi.y - lo.y <= config.screen.height
        })
    })
}

/// Generates a pattern deterministically from `(config, seed)`.
pub fn generate_pattern(config: &PatternConfig, seed: u64) -> Result<Pattern, PatternError> {
    let mut rng = PatternRng::seed_from_u64(seed);
    generate_pattern_with(config, seed, &mut rng)
}

/// Same as [`generate_pattern`] but draws from a caller-supplied generator;
/// `seed` is only recorded on the result.
pub fn generate_pattern_with<R: Rng + ?Sized>(
    config: &PatternConfig,
    seed: u64,
    rng: &mut R,
) -> Result<Pattern, PatternError> {
    config.validate()?;
    if !feasible(config) {
        return Err(PatternError::GenerationFailed {
            constraint: Constraint::Bounds,
            draws: 0,
            tally: RejectionTally::default(),
        });
    }
    let mut tally = RejectionTally::default();
    for _ in 0..config.max_draws {
        let sk = draw_skeleton(config, rng);
        let g = goodness(&sk.angles, sk.dot_count(), config.lengths.len(), &config.weights)?;
        if g < config.min_goodness {
            tally.goodness += 1;
            continue;
        }
        match layout_pattern(
            &sk.angles,
            &sk.lengths,
            config.screen.rect(),
            config.clearance,
            config.layout_attempts,
            rng,
        ) {
            Ok(dots) => {
                return Ok(Pattern {
                    seed,
                    speed: config.speed,
                    dots,
                    angles: sk.angles,
                    segment_lengths: sk.lengths,
                    goodness: g,
                })
            }
            Err(f) => {
                tally.bounds += f.bounds;
                tally.clearance += f.clearance;
            }
        }
    }
    Err(PatternError::GenerationFailed {
        constraint: tally.dominant(),
        draws: config.max_draws,
        tally,
    })
}
