use std::collections::HashSet;

use proptest::prelude::*;
use rightsize_core::eval::{count_violations, mape};
use rightsize_core::multiobj::{non_dominated, ParetoPoint};
use rightsize_core::pricing::{solve_pricing, InstancePriceRecord};
use rightsize_core::space::{Family, ResourceConfig, SearchSpace, Strategy as Layout, DEFAULT_FAMILIES};
use rightsize_core::expected_improvement;

fn strategies() -> impl Strategy<Value = Layout> {
    let fam = prop::sample::select(DEFAULT_FAMILIES.to_vec()).prop_map(Family::from);
    prop_oneof![
        Just(Layout::Decoupled),
        fam.clone().prop_map(Layout::DecoupledSingleFamily),
        fam.clone().prop_map(Layout::PropCpu),
        fam.prop_map(Layout::FixedCpu),
    ]
}

fn floors() -> impl Strategy<Value = u32> {
    prop::sample::select(vec![0u32, 128, 256, 512, 768, 1024])
}

proptest! {
    #[test]
    fn enumeration_is_a_duplicate_free_subset(strategy in strategies(), floor in floors()) {
        let full = SearchSpace::default();
        let mut space = full.with_strategy(strategy).unwrap();
        space.memory_floor_mb = floor;
        let configs = space.enumerate();
        let all: HashSet<_> = full.enumerate().into_iter().collect();
        let unique: HashSet<_> = configs.iter().cloned().collect();
        prop_assert_eq!(unique.len(), configs.len());
        for c in &configs {
            prop_assert!(all.contains(c));
            prop_assert!(space.admits(c));
            prop_assert!(c.memory_mb > floor);
        }
        let admitted = all.iter().filter(|c| space.admits(c)).count();
        prop_assert_eq!(admitted, configs.len());
    }

    #[test]
    fn encoding_is_injective(strategy in strategies()) {
        let space = SearchSpace::default().with_strategy(strategy).unwrap();
        let mut seen = HashSet::new();
        for c in space.enumerate() {
            let e = space.encode(&c).unwrap();
            prop_assert_eq!(e.len(), space.encoded_len());
            prop_assert!(e.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(seen.insert(e.iter().map(|v| v.to_bits()).collect::<Vec<_>>()));
        }
    }

    #[test]
    fn pricing_recovers_rates(
        x in prop::collection::vec(0.001f64..0.2, 1..5),
        y in prop::collection::vec(0.0005f64..0.02, 1..4),
    ) {
        let mut records = Vec::new();
        for (i, xi) in x.iter().enumerate() {
            let j = i % y.len();
            for (k, (alpha, beta)) in [(2u32, 4.0), (4, 32.0)].into_iter().enumerate() {
                let price = alpha as f64 * xi + beta * y[j];
                records.push(InstancePriceRecord::new(format!("f{i}-{k}").as_str(), alpha, beta, price, &format!("c{i}"), &format!("m{j}")));
            }
        }
        // a memory group without a cpu group of its own shares c0
        for (j, yj) in y.iter().enumerate().skip(x.len()) {
            records.push(InstancePriceRecord::new(format!("g{j}").as_str(), 2, 8.0, 2.0 * x[0] + 8.0 * yj, "c0", &format!("m{j}")));
        }
        let table = solve_pricing(&records).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let got = table.cpu_rates[&format!("c{i}")];
            prop_assert!((got - xi).abs() / xi < 1e-9);
        }
        for (j, yj) in y.iter().enumerate() {
            let got = table.mem_rates[&format!("m{j}")];
            prop_assert!((got - yj).abs() / yj < 1e-9);
        }
    }

    #[test]
    fn expected_improvement_is_non_negative(mean in -1e3f64..1e3, sd in 0.0f64..1e3, best in -1e3f64..1e3) {
        let ei = expected_improvement(mean, sd, best);
        prop_assert!(ei >= 0.0 && ei.is_finite());
        prop_assert!(ei >= (best - mean).max(0.0) - 1e-9 * (1.0 + (best - mean).abs()));
    }

    #[test]
    fn front_matches_pairwise_filter(raw in prop::collection::vec((0u8..20, 0u8..20), 1..120)) {
        let points: Vec<ParetoPoint> = raw
            .iter()
            .enumerate()
            .map(|(i, (t, c))| ParetoPoint::new(ResourceConfig::new(1.0, 1 + i as u32, "m5"), *t as f64, *c as f64))
            .collect();
        let front = non_dominated(&points).unwrap();
        let brute: HashSet<_> = points
            .iter()
            .filter(|p| !points.iter().any(|q| q.dominates(p)))
            .map(|p| p.config.clone())
            .collect();
        let got: HashSet<_> = front.iter().map(|p| p.config.clone()).collect();
        prop_assert_eq!(got, brute);
        for w in front.windows(2) {
            prop_assert!(w[0].time_ms <= w[1].time_ms);
        }
    }

    #[test]
    fn violations_ignore_order(values in prop::collection::vec(prop::option::of(1.0f64..500.0), 0..40), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut rightsize_core::seed::rng(seed));
        prop_assert_eq!(count_violations(values.clone(), 100.0, 1.5), count_violations(shuffled, 100.0, 1.5));
    }

    #[test]
    fn scaled_predictions_give_scaled_error(actual in prop::collection::vec(1.0f64..1e4, 1..50), k in 0.1f64..3.0) {
        let pairs: Vec<_> = actual.iter().map(|a| (*a, k * a)).collect();
        let m = mape(&pairs).unwrap();
        prop_assert!((m - (k - 1.0).abs() * 100.0).abs() < 1e-9);
    }
}
