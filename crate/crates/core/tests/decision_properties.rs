use iritrack_core::decision::{decide, matching_cost, Reason};
use iritrack_core::pattern::{AngleWeights, ANGLE_SET};
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = u16> {
    prop::sample::select(ANGLE_SET.to_vec())
}

fn pairs() -> impl Strategy<Value = Vec<(u16, f64)>> {
    prop::collection::vec((angle(), 0.0f64..180.0), 1..8)
}

fn split(p: &[(u16, f64)]) -> (Vec<u16>, Vec<f64>) {
    p.iter().copied().unzip()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cost_lies_between_extreme_deviations(p in pairs(), w in prop::array::uniform6(0.01f64..10.0)) {
        let (a, m) = split(&p);
        let c = matching_cost(&a, &m, &AngleWeights::new(w).unwrap()).unwrap();
        let devs: Vec<f64> = p.iter().map(|&(t, x)| (f64::from(t) - x).abs()).collect();
        let lo = devs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = devs.iter().copied().fold(0.0, f64::max);
        prop_assert!(c >= lo - 1e-9 && c <= hi + 1e-9, "{lo} <= {c} <= {hi}");
    }

    #[test]
    fn cost_ignores_weight_scale(p in pairs(), w in prop::array::uniform6(0.01f64..10.0), k in 1e-3f64..1e3) {
        let (a, m) = split(&p);
        let base = matching_cost(&a, &m, &AngleWeights::new(w).unwrap()).unwrap();
        let scaled = matching_cost(&a, &m, &AngleWeights::new(w.map(|x| x * k)).unwrap()).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn cost_ignores_joint_permutation(p in pairs(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (a, m) = split(&p);
        let mut shuffled = p.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (sa, sm) = split(&shuffled);
        let w = AngleWeights::default();
        let x = matching_cost(&a, &m, &w).unwrap();
        let y = matching_cost(&sa, &sm, &w).unwrap();
        prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
    }

    #[test]
    fn live_only_on_passing_cost(cost in 0.0f64..90.0, c0 in 0.0f64..90.0) {
        let v = decide(cost, c0);
        prop_assert_eq!(v.live, cost <= c0);
        prop_assert_eq!(v.live, v.reason == Reason::CostPass);
    }
}
