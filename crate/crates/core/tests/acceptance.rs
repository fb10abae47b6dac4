//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use iritrack_core::decision::{evaluate, matching_cost, DecisionConfig, Reason};
use iritrack_core::geometry::{Point, Similarity};
use iritrack_core::iris::synth::{render, Disc};
use iritrack_core::iris::{daugman_locate, track_frames, LocatorConfig, RegionOfInterest, RoiPlan, TrackConfig};
use iritrack_core::pattern::{
    angle_probability, dot_addition_probability, draw_skeleton, generate_pattern, goodness, slipper_schedule,
    AngleWeights, Pattern, PatternConfig, ANGLE_SET, DEFAULT_WEIGHTS,
};
use iritrack_core::simulator::{
    mean_angle_deviation, render_frames, run_benchmark, simulate_genuine, AttackMix, BenchmarkConfig,
    FrameGeometry, GazeNoiseModel, TrialKind,
};
use iritrack_core::trajectory::{interpolate_at, measure_angles, recover_dots, RecoveryMode, TrackedPoint, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("formula oracles", formula_oracles),
        ("dot-count law", dot_count_law),
        ("pattern validity", pattern_validity),
        ("iris localization", iris_localization),
        ("transform invariance", transform_invariance),
        ("end-to-end self-consistency", end_to_end),
        ("genuine noise calibration", calibration),
        ("security protocol", security_protocol),
        ("timing model", timing_model),
        ("primary suite without secondary component", primary_only),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {name}: {} [{secs:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

fn weights_of(v: &Value) -> AngleWeights {
    let w: Vec<f64> = serde_json::from_value(v["weights"].clone()).unwrap();
    AngleWeights::new(w.try_into().unwrap()).unwrap()
}

fn formula_oracles() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/formula_oracles.json");
    let data: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let f = |v: &Value| v.as_f64().unwrap();
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut count = 0;
    let mut note = |name: &'static str, e: f64| {
        let w = worst.entry(name).or_default();
        *w = w.max(e);
        count += 1;
    };
    for c in data["angle_probability"].as_array().unwrap() {
        let got = angle_probability(c["theta"].as_u64().unwrap() as u16, &weights_of(c)).unwrap();
        note("angle_probability", rel_err(got, f(&c["expected"])));
    }
    for c in data["dot_addition_probability"].as_array().unwrap() {
        let got = dot_addition_probability(c["k"].as_u64().unwrap() as usize).unwrap();
        note("dot_addition_probability", rel_err(got, f(&c["expected"])));
    }
    for c in data["goodness"].as_array().unwrap() {
        let angles: Vec<u16> = serde_json::from_value(c["angles"].clone()).unwrap();
        let size = c["set_size"].as_u64().unwrap() as usize;
        let got = goodness(&angles, angles.len() + 2, size, &weights_of(c)).unwrap();
        note("goodness", rel_err(got, f(&c["expected"])));
    }
    for c in data["matching_cost"].as_array().unwrap() {
        let angles: Vec<u16> = serde_json::from_value(c["angles"].clone()).unwrap();
        let measured: Vec<f64> = serde_json::from_value(c["measured"].clone()).unwrap();
        let got = matching_cost(&angles, &measured, &weights_of(c)).unwrap();
        note("matching_cost", rel_err(got, f(&c["expected"])));
    }
    let mut flags_ok = true;
    for c in data["interpolate_at"].as_array().unwrap() {
        let p = |k: &str| Point::new(f(&c[k][0]), f(&c[k][1]));
        let m = TrackedPoint::new(f(&c["t_m"]), p("m"), 1.0);
        let n = TrackedPoint::new(f(&c["t_n"]), p("n"), 1.0);
        let got = interpolate_at(&m, &n, f(&c["t_o"])).unwrap();
        let want = p("expected");
        note(
            "interpolate_at",
            rel_err(got.position.x, want.x).max(rel_err(got.position.y, want.y)),
        );
        flags_ok &= got.extrapolated == c["extrapolated"].as_bool().unwrap();
    }
    let max = worst.values().copied().fold(0.0, f64::max);
    let per: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    outcome(
        max <= 1e-9 && flags_ok && count == 5000,
        format!("{count} values, max relative error {max:.1e} (tol 1e-9): {}", per.join(", ")),
    )
}

fn dot_count_law() -> Outcome {
    let draws = 100_000;
    let cfg = PatternConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(draw_skeleton(&cfg, &mut rng).dot_count()).or_default() += 1;
    }
    let expected = [(4, 1.0 / 2.0), (5, 1.0 / 3.0), (6, 1.0 / 8.0), (7, 1.0 / 30.0)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, p) in expected {
        let got = counts.get(&n).copied().unwrap_or(0) as f64 / draws as f64;
        let bound = 3.0 * (p * (1.0 - p) / draws as f64).sqrt();
        pass &= (got - p).abs() <= bound;
        parts.push(format!("n={n} {got:.4} (want {p:.4} ± {bound:.4})"));
    }
    outcome(pass, parts.join(", "))
}

fn pattern_validity() -> Outcome {
    let cfg = PatternConfig::default();
    let results: Vec<(usize, f64)> = (0..10_000u64)
        .into_par_iter()
        .map(|seed| {
            let p = generate_pattern(&cfg, seed).unwrap();
            (p.violations(&cfg).len(), p.goodness)
        })
        .collect();
    let violations: usize = results.iter().map(|r| r.0).sum();
    let min_g = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    outcome(
        violations == 0 && min_g >= 1.4,
        format!("10000 patterns, {violations} violations, minimum goodness {min_g:.4} (floor 1.4)"),
    )
}

struct DiscCase {
    center: Point,
    radius: f64,
    noisy: bool,
}

fn disc_cases(count: usize, seed: u64) -> Vec<DiscCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| DiscCase {
            center: Point::new(48.0 + rng.random_range(-6.0..6.0), 48.0 + rng.random_range(-6.0..6.0)),
            radius: rng.random_range(10.0..=30.0),
            noisy: k % 2 == 1,
        })
        .collect()
}

fn disc_frame(case: &DiscCase, seed: u64) -> iritrack_core::iris::Frame {
    let disc = Disc {
        center: case.center,
        radius: case.radius,
        level: 40,
    };
    let sigma = if case.noisy { 10.0 } else { 0.0 };
    render(96, 96, 200, &[disc], sigma, 0.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn iris_localization() -> Outcome {
    let cfg = LocatorConfig::with_radii(8.0, 36.0);
    let cases = disc_cases(200, 21);
    let hits: usize = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let f = disc_frame(c, i as u64);
            let fix = daugman_locate(&f, &f.full_roi(), &cfg).unwrap();
            usize::from(fix.center.distance(c.center) <= 2.0 && (fix.radius - c.radius).abs() <= 2.0)
        })
        .sum();
    let exhaustive = LocatorConfig {
        exhaustive: true,
        ..cfg.clone()
    };
    let agree: usize = cases[..50]
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let f = disc_frame(c, i as u64);
            let a = daugman_locate(&f, &f.full_roi(), &cfg).unwrap();
            let b = daugman_locate(&f, &f.full_roi(), &exhaustive).unwrap();
            usize::from(a.center == b.center && a.radius == b.radius)
        })
        .sum();
    let rate = hits as f64 / 200.0;
    outcome(
        rate >= 0.95 && agree == 50,
        format!("{hits}/200 within 2 px centre and radius (need ≥ 95%), coarse-to-fine equals exhaustive on {agree}/50"),
    )
}

fn exact_trajectory(p: &Pattern, interval_ms: f64) -> Trajectory {
    let s = slipper_schedule(p, interval_ms).unwrap();
    Trajectory::new(s.keyframes.iter().map(|k| TrackedPoint::new(k.t_ms, k.position(), 1.0)).collect()).unwrap()
}

fn angles_of(p: &Pattern, t: &Trajectory) -> Vec<f64> {
    let d = recover_dots(t, &p.segment_lengths, p.dot_count(), RecoveryMode::Timestamp).unwrap();
    measure_angles(&d).unwrap()
}

fn transform_invariance() -> Outcome {
    let cfg = DecisionConfig::default();
    let failures: usize = (0..1000u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = generate_pattern(&PatternConfig::default(), seed).unwrap();
            let t = exact_trajectory(&p, rng.random_range(2.0..40.0));
            let sim = Similarity {
                scale: rng.random_range(0.05..20.0),
                rotation_rad: rng.random_range(-10.0..10.0),
                reflect: rng.random_bool(0.5),
                offset: Point::new(rng.random_range(-5e3..5e3), rng.random_range(-5e3..5e3)),
            };
            let moved = t.map_positions(|q| sim.apply(q));
            let (a, b) = (angles_of(&p, &t), angles_of(&p, &moved));
            let same_angles = a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-6);
            let same_verdict = evaluate(&p, &t, None, None, &cfg) == evaluate(&p, &moved, None, None, &cfg);
            usize::from(!(same_angles && same_verdict))
        })
        .sum();
    outcome(
        failures == 0,
        format!("1000 triples, {failures} with differing angles (tol 1e-6°) or verdicts"),
    )
}

fn end_to_end() -> Outcome {
    let cfg = DecisionConfig::default();
    let noise = GazeNoiseModel {
        sample_rate: 30.0,
        ..GazeNoiseModel::noiseless()
    };
    let track = TrackConfig {
        locator: LocatorConfig::with_radii(8.0, 16.0),
        ..TrackConfig::default()
    };
    let results: Vec<Option<f64>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let p = generate_pattern(&PatternConfig::default(), 1000 + seed).unwrap();
            let direct = simulate_genuine(&p, &noise, &mut rng).unwrap();
            let geom = FrameGeometry::fit(&direct.positions(), 640, 480, 40.0);
            let frames = render_frames(&direct, &geom, 12.0, 0.0, &mut rng).unwrap();
            let rois = direct
                .points()
                .iter()
                .map(|q| {
                    let c = geom.map(q.position());
                    let (dx, dy) = (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
                    RegionOfInterest::centered(c.x + dx, c.y + dy, 64, 64, 640, 480)
                })
                .collect();
            let tracked = track_frames(&frames, &RoiPlan::PerFrame(rois), &track).ok()?;
            let tracked = Trajectory::new(tracked).ok()?.map_positions(|q| geom.unmap(q));
            let a = evaluate(&p, &direct, None, None, &cfg);
            let b = evaluate(&p, &tracked, None, None, &cfg);
            let diff = (a.cost_deg? - b.cost_deg?).abs();
            (a.live == b.live).then_some(diff)
        })
        .collect();
    let agreed = results.iter().filter(|r| matches!(r, Some(d) if *d <= 2.0)).count();
    let worst = results.iter().flatten().copied().fold(0.0, f64::max);
    outcome(
        agreed == 100,
        format!("{agreed}/100 runs agree with the direct trajectory, worst cost difference {worst:.2}° (tol 2°)"),
    )
}

fn calibration() -> Outcome {
    let s = mean_angle_deviation(
        &PatternConfig::default(),
        &GazeNoiseModel::default(),
        &DecisionConfig::default(),
        1000,
        2024,
    )
    .unwrap();
    let per: Vec<String> = s.per_angle.iter().map(|(a, d)| format!("{a}°:{d:.1}")).collect();
    outcome(
        (s.mean_deg - 20.0).abs() <= 3.0,
        format!(
            "1000 runs, mean per-angle deviation {:.2}° (want 20 ± 3), per angle {}",
            s.mean_deg,
            per.join(" ")
        ),
    )
}

fn probabilities() -> [f64; 6] {
    let total: f64 = DEFAULT_WEIGHTS.iter().sum();
    DEFAULT_WEIGHTS.map(|w| w / total)
}

/// Chance that a decoy with i.i.d. weighted angles passes against `target`.
fn replay_oracle(target: &[u16], c0: f64) -> f64 {
    let p = probabilities();
    let w = |a: u16| DEFAULT_WEIGHTS[ANGLE_SET.iter().position(|&x| x == a).unwrap()];
    let den: f64 = target.iter().map(|&t| w(t)).sum();
    let k = target.len();
    let mut idx = vec![0usize; k];
    let mut acc = 0.0;
    loop {
        let num: f64 = target
            .iter()
            .zip(&idx)
            .map(|(&t, &i)| w(t) * f64::from(t.abs_diff(ANGLE_SET[i])))
            .sum();
        if num / den <= c0 {
            acc += idx.iter().map(|&i| p[i]).product::<f64>();
        }
        let mut d = 0;
        loop {
            if d == k {
                return acc;
            }
            idx[d] += 1;
            if idx[d] < 6 {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn security_protocol() -> Outcome {
    let cfg = BenchmarkConfig {
        trials: 1680,
        seed: 7,
        mix: AttackMix {
            genuine: 720.0,
            replay: 720.0,
            photo: 240.0,
        },
        ..BenchmarkConfig::default()
    };
    let c0 = cfg.decision.c0_deg;
    let out = run_benchmark(&cfg).unwrap();
    let report = &out.report;

    let recall = report.recall;
    let a = recall >= 0.90;

    let replay: Vec<_> = out.trials.iter().filter(|t| t.kind == TrialKind::Replay).collect();
    let oracle: Vec<f64> = replay.iter().map(|t| replay_oracle(&t.angles, c0)).collect();
    let expect: f64 = oracle.iter().sum::<f64>() / replay.len() as f64;
    let sd = oracle.iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt() / replay.len() as f64;
    let accepted = replay.iter().filter(|t| t.verdict.live).count();
    let rate = accepted as f64 / replay.len() as f64;
    let b = (rate - expect).abs() <= 3.0 * sd;

    let mut by_k: BTreeMap<usize, (usize, usize, f64)> = BTreeMap::new();
    for (t, p) in replay.iter().zip(&oracle) {
        let e = by_k.entry(t.angles.len()).or_default();
        e.0 += 1;
        e.1 += usize::from(t.verdict.live);
        e.2 += p;
    }
    let rows: Vec<(usize, usize, f64, f64)> = (2..=5)
        .filter_map(|k| {
            by_k.get(&k)
                .map(|&(n, acc, p)| (k, n, acc as f64 / n as f64, p / n as f64))
        })
        .collect();
    let c = rows.windows(2).all(|w| {
        let (_, n0, r0, p0) = w[0];
        let (_, n1, r1, p1) = w[1];
        let se = (p0 * (1.0 - p0) / n0 as f64 + p1 * (1.0 - p1) / n1 as f64).sqrt();
        r1 <= r0 + 3.0 * se
    });
    let per_k: Vec<String> = rows
        .iter()
        .map(|(k, n, r, p)| format!("k={k}: {r:.3} of {n} (oracle {p:.3})"))
        .collect();

    let photos: Vec<_> = out.trials.iter().filter(|t| t.kind == TrialKind::Photo).collect();
    let d = !photos.is_empty()
        && photos
            .iter()
            .all(|t| !t.verdict.live && matches!(t.verdict.reason, Reason::FaceMotion | Reason::Timeout));

    outcome(
        a && b && c && d,
        format!(
            "(a) recall {recall:.3} (need ≥ 0.90) {}; (b) replay acceptance {rate:.4} vs oracle {expect:.4} ± {:.4} {}; \
             (c) by angle count [{}] {}; (d) {} photo trials rejected by face motion or timeout: {} {}; \
             precision {:.3}, F1 {:.3}",
            mark(a),
            3.0 * sd,
            mark(b),
            per_k.join(", "),
            mark(c),
            photos.len(),
            photos
                .iter()
                .filter(|t| matches!(t.verdict.reason, Reason::FaceMotion | Reason::Timeout))
                .count(),
            mark(d),
            report.precision,
            report.f1,
        ),
    )
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn timing_model() -> Outcome {
    let mut by_k: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for seed in 0..1000u64 {
        let p = generate_pattern(&PatternConfig::default(), 50_000 + seed).unwrap();
        let s = slipper_schedule(&p, 1000.0 / 60.0).unwrap();
        let e = by_k.entry(p.angles.len()).or_default();
        e.0 += 1;
        e.1 += s.total_duration_ms;
    }
    let means: Vec<(usize, f64)> = by_k.iter().map(|(&k, &(n, d))| (k, d / n as f64)).collect();
    let pass = means.len() >= 2 && means.windows(2).all(|w| w[1].1 > w[0].1);
    let parts: Vec<String> = means
        .iter()
        .map(|(k, m)| format!("{k} angles {m:.0} ms ({} patterns)", by_k[k].0))
        .collect();
    outcome(pass, format!("mean duration rises with angle count: {}", parts.join(", ")))
}

fn primary_only() -> Outcome {
    let crates = Path::new(env!("CARGO_MANIFEST_DIR")).join("..");
    let mut names: Vec<String> = std::fs::read_dir(crates)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("Cargo.toml").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let ui = names.iter().any(|n| n.contains("ui"));
    outcome(!ui, format!("workspace crates: {}", names.join(", ")))
}
