use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::Rng;

use consensus_sim::algorithms::{
    equal_neighbor_update, mean_value_update, midpoint_update, parse_behavior, Behavior,
    QuantizationSpec, RoundingMode, Rule,
};
use consensus_sim::dynamics::{random_nonsplit, random_rooted, round_rng, Schedule};
use consensus_sim::engine::{run, ExecutionConfig, HorizonPolicy};
use consensus_sim::value::parse_rational;
use consensus_sim::{CommunicationGraph, Rational, Scalar};

fn rat(n: i64, d: i64) -> Rational {
    <Rational as Scalar>::from_ratio(n, d)
}

/// A digraph with arbitrary extra edges on top of the forced self-loops.
fn random_digraph(n: usize, seed: u64, density: f64) -> CommunicationGraph {
    let mut rng = round_rng(seed, 0);
    let mut extra = Vec::new();
    for p in 1..=n {
        for q in 1..=n {
            if p != q && rng.gen_bool(density) {
                extra.push((p, q));
            }
        }
    }
    CommunicationGraph::new(n, extra).expect("edges in range")
}

proptest! {
    #[test]
    fn compose_is_associative(n in 2usize..8, seed in any::<u64>()) {
        let a = random_digraph(n, seed, 0.3);
        let b = random_digraph(n, seed.wrapping_add(1), 0.3);
        let c = random_digraph(n, seed.wrapping_add(2), 0.3);
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn compose_contains_both_factors(n in 2usize..8, seed in any::<u64>()) {
        let a = random_digraph(n, seed, 0.3);
        let b = random_digraph(n, seed.wrapping_add(1), 0.3);
        let prod = a.compose(&b).unwrap();
        // self-loops everywhere make the product monotone in both factors
        for (p, q) in a.edges().into_iter().chain(b.edges()) {
            prop_assert!(prod.has_edge(p, q), "missing ({p},{q})");
        }
        for p in 1..=n {
            prop_assert!(prod.has_edge(p, p));
        }
    }

    #[test]
    fn rooted_products_are_nonsplit(n in 2usize..10, seed in any::<u64>()) {
        let mut rng = round_rng(seed, 1);
        let graphs: Vec<_> = (0..n - 1)
            .map(|_| random_rooted(n, &mut rng, 0.1))
            .collect();
        for g in &graphs {
            prop_assert!(g.is_rooted());
        }
        prop_assert!(CommunicationGraph::product_of(&graphs).unwrap().is_nonsplit());
    }

    #[test]
    fn nonsplit_generator_is_honest(n in 1usize..12, seed in any::<u64>()) {
        let mut rng = round_rng(seed, 2);
        prop_assert!(random_nonsplit(n, &mut rng, 0.2).is_nonsplit());
    }

    #[test]
    fn update_rules_stay_in_range(values in prop::collection::vec(0i64..=1000, 1..12)) {
        let values: Vec<Rational> = values.into_iter().map(|v| rat(v, 1000)).collect();
        let lo = values.iter().min().unwrap().clone();
        let hi = values.iter().max().unwrap().clone();
        let en = equal_neighbor_update(&values).unwrap();
        prop_assert!(lo <= en && en <= hi);
        let set: BTreeSet<Rational> = values.iter().cloned().collect();
        let mv = mean_value_update(&set).unwrap();
        prop_assert!(lo <= mv && mv <= hi);
        let mid = midpoint_update(&lo, &hi).unwrap();
        prop_assert!(lo <= mid && mid <= hi);
    }

    #[test]
    fn mean_value_ignores_duplicates(values in prop::collection::vec(0i64..=50, 1..8)) {
        let once: BTreeSet<Rational> = values.iter().map(|&v| rat(v, 50)).collect();
        let doubled: BTreeSet<Rational> = values
            .iter()
            .chain(values.iter())
            .map(|&v| rat(v, 50))
            .collect();
        prop_assert_eq!(mean_value_update(&once).unwrap(), mean_value_update(&doubled).unwrap());
    }

    #[test]
    fn macro_length_one_matches_plain(
        n in 2usize..7,
        seed in any::<u64>(),
        rule_pick in 0usize..3,
    ) {
        let rule = [Rule::Midpoint, Rule::EqualNeighbor, Rule::MeanValue][rule_pick];
        let mut rng = round_rng(seed, 3);
        let initial: Vec<Rational> = (0..n).map(|_| rat(rng.gen_range(0..=100), 100)).collect();
        let schedule = Schedule::random_rooted(n, seed, 0.2).unwrap();
        let mut config = ExecutionConfig {
            behavior: Behavior::plain(rule),
            schedule,
            initial,
            epsilon: rat(1, 10),
            horizon: HorizonPolicy::FixedRounds(12),
        };
        let plain = run(&config).unwrap();
        config.behavior = Behavior::plain(rule).amortize(1).unwrap();
        let amortized = run(&config).unwrap();
        prop_assert_eq!(plain.values, amortized.values);
    }

    #[test]
    fn quantized_runs_stay_on_grid(
        q in 2u64..40,
        n in 2usize..6,
        seed in any::<u64>(),
        up in any::<bool>(),
    ) {
        let mut rng = round_rng(seed, 4);
        let initial: Vec<Rational> = (0..n)
            .map(|_| rat(rng.gen_range(0..=q) as i64, q as i64))
            .collect();
        let mode = if up { RoundingMode::Up } else { RoundingMode::Down };
        let config = ExecutionConfig {
            behavior: Behavior::plain(Rule::Midpoint)
                .amortize((n - 1) as u64)
                .unwrap()
                .quantized(QuantizationSpec { q, mode })
                .unwrap(),
            schedule: Schedule::random_rooted(n, seed, 0.2).unwrap(),
            initial,
            epsilon: rat(1, 1),
            horizon: HorizonPolicy::FixedRounds(3 * (n as u64 - 1)),
        };
        let trace = run(&config).unwrap();
        for xs in &trace.values {
            for v in xs {
                prop_assert!(v.on_grid(q), "{} off the 1/{q} grid", v.render());
            }
        }
    }

    #[test]
    fn schedules_and_runs_are_reproducible(n in 1usize..9, seed in any::<u64>(), k in 1u64..200) {
        let a = Schedule::random_rooted(n, seed, 0.25).unwrap();
        let b = Schedule::random_rooted(n, seed, 0.25).unwrap();
        prop_assert_eq!(a.graph_at(k), b.graph_at(k));

        let initial: Vec<Rational> = (0..n).map(|i| rat(i as i64, n as i64)).collect();
        let config = ExecutionConfig {
            behavior: Behavior::plain(Rule::Midpoint),
            schedule: a,
            initial,
            epsilon: rat(1, 10),
            horizon: HorizonPolicy::FixedRounds(10),
        };
        let first = run(&config).unwrap();
        let second = run(&config).unwrap();
        prop_assert_eq!(first.to_csv(), second.to_csv());
    }

    #[test]
    fn edge_list_round_trips(n in 1usize..20, seed in any::<u64>()) {
        let g = random_digraph(n, seed, 0.2);
        let (parsed, missing) = CommunicationGraph::parse_edge_list(&g.to_edge_list()).unwrap();
        prop_assert_eq!(parsed, g);
        prop_assert!(missing.is_empty());
    }

    #[test]
    fn behavior_descriptors_round_trip(
        rule_pick in 0usize..4,
        amortized in any::<bool>(),
        q in prop::option::of(1u64..100),
        up in any::<bool>(),
    ) {
        let rule = [Rule::Midpoint, Rule::EqualNeighbor, Rule::MeanValue, Rule::ThirdPoint]
            [rule_pick];
        let mut behavior = Behavior::plain(rule);
        if amortized {
            behavior = behavior.amortize(1).unwrap();
        }
        if let Some(q) = q {
            let mode = if up { RoundingMode::Up } else { RoundingMode::Down };
            behavior = behavior.quantized(QuantizationSpec { q, mode }).unwrap();
        }
        prop_assert_eq!(parse_behavior(&behavior.to_string()).unwrap(), behavior);
    }

    #[test]
    fn rational_parsing_agrees_with_f64(num in 0u32..10000u32, scale in 0u32..5) {
        let text = format!("{}e-{}", num, scale);
        let exact = parse_rational(&text).unwrap();
        let float: f64 = text.parse().unwrap();
        prop_assert!((Scalar::to_f64(&exact) - float).abs() <= 1e-12 * float.abs().max(1.0));
    }
}
