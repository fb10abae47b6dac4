//! Monte-Carlo measurement of the angular deviation a noise model produces,
//! and the search that pins the default model to a target deviation.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate_genuine, GazeNoiseModel, SimError};
use crate::decision::{matching_cost, DecisionConfig};
use crate::pattern::{generate_pattern_with, PatternConfig};
use crate::trajectory::{measure_angles, recover_dots};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub runs: usize,
    /// Runs whose angles could be measured.
    pub measured_runs: usize,
    /// Mean of `|issued - measured|` over every measured angle.
    pub mean_deg: f64,
    /// The same mean broken down by issued angle.
    pub per_angle: BTreeMap<u16, f64>,
    /// Share of measured runs with cost within the threshold.
    pub pass_rate: f64,
}

/// Runs `runs` genuine trials on freshly generated patterns.
/// Per-angle deviations and matching cost of one measured run.
type RunDeviation = (Vec<(u16, f64)>, f64);

pub fn mean_angle_deviation(
    pattern_cfg: &PatternConfig,
    noise: &GazeNoiseModel,
    decision: &DecisionConfig,
    runs: usize,
    seed: u64,
) -> Result<DeviationStats, SimError> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..runs).map(|_| master.random()).collect();
    let per_run = seeds
        .par_iter()
        .map(|&s| -> Result<Option<RunDeviation>, SimError> {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let pattern = generate_pattern_with(pattern_cfg, s, &mut rng)?;
            let traj = simulate_genuine(&pattern, noise, &mut rng)?;
            let measured = recover_dots(
                &traj,
                &pattern.segment_lengths,
                pattern.dot_count(),
                decision.recovery_mode,
            )
            .and_then(|d| measure_angles(&d));
            let Ok(measured) = measured else {
                return Ok(None);
            };
            let cost = matching_cost(&pattern.angles, &measured, &decision.weights)?;
            let devs = pattern
                .angles
                .iter()
                .zip(&measured)
                .map(|(&a, &m)| (a, (f64::from(a) - m).abs()))
                .collect();
            Ok(Some((devs, cost)))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut sums: BTreeMap<u16, (f64, usize)> = BTreeMap::new();
    let (mut total, mut count, mut measured_runs, mut passes) = (0.0, 0usize, 0usize, 0usize);
    for (devs, cost) in per_run.into_iter().flatten() {
        measured_runs += 1;
        if cost <= decision.c0_deg {
            passes += 1;
        }
        for (a, d) in devs {
            let e = sums.entry(a).or_default();
            e.0 += d;
            e.1 += 1;
            total += d;
            count += 1;
        }
    }
    Ok(DeviationStats {
        runs,
        measured_runs,
        mean_deg: if count > 0 { total / count as f64 } else { f64::NAN },
        per_angle: sums.into_iter().map(|(a, (s, n))| (a, s / n as f64)).collect(),
        pass_rate: if measured_runs > 0 {
            passes as f64 / measured_runs as f64
        } else {
            0.0
        },
    })
}

/// Bisects the turn error of `base` until the mean deviation over `runs`
/// trials is within `tolerance` of `target_deg`. Deviation grows with the
/// turn error, so the search brackets `[0, 60]` degrees.
pub fn calibrate_turn_error(
    pattern_cfg: &PatternConfig,
    base: &GazeNoiseModel,
    decision: &DecisionConfig,
    target_deg: f64,
    tolerance: f64,
    runs: usize,
    seed: u64,
) -> Result<(GazeNoiseModel, DeviationStats), SimError> {
    let at = |turn: f64| {
        let noise = GazeNoiseModel {
            turn_error_deg: turn,
            ..base.clone()
        };
        mean_angle_deviation(pattern_cfg, &noise, decision, runs, seed).map(|s| (noise, s))
    };
    let (mut lo, mut hi): (f64, f64) = (0.0, 60.0);
    let mut best = at(base.turn_error_deg)?;
    for _ in 0..24 {
        if (best.1.mean_deg - target_deg).abs() <= tolerance {
            break;
        }
        let mid = 0.5 * (lo + hi);
        best = at((mid * 10.0).round() / 10.0)?;
        if best.1.mean_deg < target_deg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}
