use iritrack_core::decision::{evaluate, DecisionConfig};
use iritrack_core::geometry::{interior_angle_deg, Point, Similarity};
use iritrack_core::pattern::{generate_pattern, slipper_schedule, Pattern, PatternConfig};
use iritrack_core::trajectory::{
    interpolate_at, measure_angles, recover_dots, vote_angle, RecoveryMode, TrackedPoint, Trajectory,
};
use proptest::prelude::*;

fn pattern(seed: u64) -> Pattern {
    generate_pattern(&PatternConfig::default(), seed).unwrap()
}

/// Samples on every schedule keyframe, so each dot is hit exactly.
fn exact(p: &Pattern, interval_ms: f64) -> Trajectory {
    let s = slipper_schedule(p, interval_ms).unwrap();
    Trajectory::new(s.keyframes.iter().map(|k| TrackedPoint::new(k.t_ms, k.position(), 1.0)).collect()).unwrap()
}

/// `count + 1` samples evenly spread over the schedule, ignoring dot times.
fn uniform(p: &Pattern, count: usize) -> Trajectory {
    let s = slipper_schedule(p, 1.0).unwrap();
    let step = s.total_duration_ms / count as f64;
    Trajectory::new(
        (0..=count)
            .map(|k| {
                let t = if k == count { s.total_duration_ms } else { step * k as f64 };
                TrackedPoint::new(t, s.position_at(t), 1.0)
            })
            .collect(),
    )
    .unwrap()
}

fn angles_of(p: &Pattern, t: &Trajectory) -> Vec<f64> {
    let d = recover_dots(t, &p.segment_lengths, p.dot_count(), RecoveryMode::Timestamp).unwrap();
    measure_angles(&d).unwrap()
}

fn similarity() -> impl Strategy<Value = Similarity> {
    (0.05f64..20.0, -10.0f64..10.0, any::<bool>(), -5e3f64..5e3, -5e3f64..5e3).prop_map(
        |(scale, rotation_rad, reflect, x, y)| Similarity {
            scale,
            rotation_rad,
            reflect,
            offset: Point::new(x, y),
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn similarity_leaves_angles_and_verdict_unchanged(seed in any::<u64>(), sim in similarity(), interval in 2.0f64..40.0) {
        let p = pattern(seed);
        let t = exact(&p, interval);
        let moved = t.map_positions(|q| sim.apply(q));
        let (a, b) = (angles_of(&p, &t), angles_of(&p, &moved));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-6, "{a:?} vs {b:?}");
        }
        let cfg = DecisionConfig::default();
        prop_assert_eq!(evaluate(&p, &t, None, None, &cfg), evaluate(&p, &moved, None, None, &cfg));
    }

    #[test]
    fn resampling_moves_dots_by_at_most_one_spacing(seed in any::<u64>(), m in 60usize..400, k in 60usize..400) {
        let p = pattern(seed);
        let (a, b) = (uniform(&p, m), uniform(&p, k));
        let spacing = p.segment_lengths.iter().sum::<f64>() / m.min(k) as f64;
        let da = recover_dots(&a, &p.segment_lengths, p.dot_count(), RecoveryMode::Timestamp).unwrap();
        let db = recover_dots(&b, &p.segment_lengths, p.dot_count(), RecoveryMode::Timestamp).unwrap();
        for (x, y) in da.iter().zip(&db) {
            let d = x.candidates[1].distance(y.candidates[1]);
            prop_assert!(d <= spacing + 1e-9, "dot {} moved {d} > {spacing}", x.dot_index);
        }
    }

    #[test]
    fn interpolation_is_exact_on_linear_motion(
        ax in -1e3f64..1e3, ay in -1e3f64..1e3, bx in -5.0f64..5.0, by in -5.0f64..5.0,
        t_m in 0.0f64..1e4, dt in 0.5f64..1e3, u in -1.0f64..2.0,
    ) {
        let at = |t: f64| Point::new(ax + bx * t, ay + by * t);
        let t_n = t_m + dt;
        let t_o = t_m + u * dt;
        let m = TrackedPoint::new(t_m, at(t_m), 1.0);
        let n = TrackedPoint::new(t_n, at(t_n), 1.0);
        let got = interpolate_at(&m, &n, t_o).unwrap();
        let want = at(t_o);
        let scale = 1.0 + want.x.abs().max(want.y.abs());
        prop_assert!(got.position.distance(want) <= 1e-9 * scale);
        prop_assert_eq!(got.extrapolated, !(0.0..=1.0).contains(&u));
    }

    #[test]
    fn dense_noiseless_trace_measures_pattern_angles(seed in any::<u64>()) {
        let p = pattern(seed);
        let measured = angles_of(&p, &exact(&p, 1.0));
        for (&want, got) in p.angles.iter().zip(&measured) {
            prop_assert!((f64::from(want) - got).abs() <= 1.0, "{:?} vs {measured:?}", p.angles);
        }
    }

    #[test]
    fn one_pixel_jitter_around_120_degrees(offsets in prop::array::uniform9((-1.0f64..=1.0, -1.0f64..=1.0))) {
        let b = Point::new(0.0, 0.0);
        let a = Point::new(100.0, 0.0);
        let rad = 120f64.to_radians();
        let c = Point::new(100.0 * rad.cos(), 100.0 * rad.sin());
        let j = |p: Point, k: usize| p + Point::new(offsets[k].0, offsets[k].1);
        let sa = [j(a, 0), j(a, 1), j(a, 2)];
        let sb = [j(b, 3), j(b, 4), j(b, 5)];
        let sc = [j(c, 6), j(c, 7), j(c, 8)];
        let got = vote_angle(&sa, &sb, &sc).unwrap();
        prop_assert!((got - 120.0).abs() <= 3.0, "{got}");
        prop_assert_eq!(got, brute_force_mode(&sa, &sb, &sc));
    }
}

/// Independent mode over the 27 quantized votes, ties nearest the median.
fn brute_force_mode(a: &[Point; 3], b: &[Point; 3], c: &[Point; 3]) -> f64 {
    let mut votes = Vec::new();
    for pa in a {
        for pb in b {
            for pc in c {
                votes.push(interior_angle_deg(*pa, *pb, *pc).unwrap().round());
            }
        }
    }
    votes.sort_by(f64::total_cmp);
    let median = if votes.len() % 2 == 1 {
        votes[votes.len() / 2]
    } else {
        0.5 * (votes[votes.len() / 2 - 1] + votes[votes.len() / 2])
    };
    let count = |v: f64| votes.iter().filter(|&&x| x == v).count();
    let mut best = votes[0];
    for &v in &votes {
        let (cv, cb) = (count(v), count(best));
        if cv > cb || (cv == cb && ((v - median).abs() < (best - median).abs()
            || ((v - median).abs() == (best - median).abs() && v < best)))
        {
            best = v;
        }
    }
    best
}

#[test]
fn thirty_one_sample_example() {
    let t = Trajectory::new(
        (0..31).map(|k| TrackedPoint::new(100.0 * k as f64, Point::new(10.0 * k as f64, 0.0), 1.0)).collect(),
    )
    .unwrap();
    let d = recover_dots(&t, &[150.0, 150.0], 3, RecoveryMode::Timestamp).unwrap();
    assert_eq!(d[1].nominal_time_ms, 1500.0);
    assert_eq!(d[1].sample_index + 1, 16);
    assert_eq!(d[0].candidates, [Point::new(0.0, 0.0); 3]);
    assert_eq!(d[2].candidates, [Point::new(300.0, 0.0); 3]);
}
