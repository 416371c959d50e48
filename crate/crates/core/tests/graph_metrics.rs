use std::collections::BTreeSet;

use kgroup::generate::random_connected;
use kgroup::graph::{Graph, Hops, ProcessId};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph(n: u32, extra: f64, seed: u64) -> Graph {
    random_connected(n, extra, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dist_is_a_metric(n in 2u32..14, extra in 0.0..0.5, seed: u64) {
        let g = graph(n, extra, seed);
        let ids = g.ids().to_vec();
        let d = |a, b| g.dist(a, b).unwrap().finite().unwrap();
        for &a in &ids {
            prop_assert_eq!(d(a, a), 0);
            for &b in &ids {
                prop_assert_eq!(d(a, b), d(b, a));
                if a != b {
                    prop_assert!(d(a, b) >= 1);
                }
                for &c in &ids {
                    prop_assert!(d(a, c) <= d(a, b) + d(b, c));
                }
            }
        }
    }

    #[test]
    fn induced_diameter_is_the_largest_pair(n in 2u32..12, seed: u64, mask: u16) {
        let g = graph(n, 0.2, seed);
        let set: BTreeSet<ProcessId> = g
            .ids()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &v)| v)
            .collect();
        prop_assume!(!set.is_empty());
        let mut worst = Hops::Finite(0);
        for &a in &set {
            for &b in &set {
                worst = worst.max(g.induced_dist(&set, a, b).unwrap());
            }
        }
        prop_assert_eq!(g.induced_diameter(&set).unwrap(), worst);
        // the induced metric never beats the ambient one
        for &a in &set {
            for &b in &set {
                prop_assert!(g.induced_dist(&set, a, b).unwrap() >= g.dist(a, b).unwrap());
            }
        }
    }

    #[test]
    fn neighborhoods_grow_to_everything(n in 2u32..16, seed: u64) {
        let g = graph(n, 0.1, seed);
        let all: BTreeSet<ProcessId> = g.ids().iter().copied().collect();
        for &v in g.ids() {
            let mut prev = g.k_neighborhood(v, 0).unwrap();
            prop_assert_eq!(&prev, &BTreeSet::from([v]));
            for i in 1..n {
                let next = g.k_neighborhood(v, i).unwrap();
                prop_assert!(prev.is_subset(&next));
                let expect: BTreeSet<ProcessId> =
                    all.iter().copied().filter(|&u| g.dist(v, u).unwrap() <= Hops::Finite(i)).collect();
                prop_assert_eq!(&next, &expect);
                prev = next;
            }
            prop_assert_eq!(prev, all.clone());
        }
    }

    #[test]
    fn json_round_trip(n in 2u32..20, seed: u64) {
        let g = graph(n, 0.2, seed);
        prop_assert_eq!(Graph::from_json_str(&g.to_json()).unwrap(), g);
    }
}
