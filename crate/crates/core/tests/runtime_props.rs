use kgroup::compose::Loop;
use kgroup::generate::{false_ids, random_config, random_connected};
use kgroup::graph::Graph;
use kgroup::kgrouping::{GState, KGrouping, KLoop};
use kgroup::runtime::{self, Algorithm, Configuration, DaemonPolicy, Engine};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(n: u32, k: u32, seed: u64) -> (Graph, KLoop, Configuration<GState>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_connected(n, 0.15, &mut rng).unwrap();
    let alg = Loop::compose(KGrouping::new(k).unwrap(), g.len()).unwrap();
    let cfg = random_config(&g, k, &false_ids(&g, 2), &mut rng);
    (g, alg, cfg)
}

fn daemon(which: u8, seed: u64) -> DaemonPolicy {
    match which % 3 {
        0 => DaemonPolicy::synchronous(),
        1 => DaemonPolicy::central(Some(seed)),
        _ => DaemonPolicy::random(0.5, seed),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identical_inputs_give_identical_traces(n in 3u32..12, k in 1u32..5, seed: u64, which: u8) {
        let (g, alg, cfg) = instance(n, k, seed);
        let a = runtime::run(&g, &alg, cfg.clone(), daemon(which, seed), 3000).unwrap();
        let b = runtime::run(&g, &alg, cfg, daemon(which, seed), 3000).unwrap();
        prop_assert_eq!(&a.0.steps, &b.0.steps);
        prop_assert_eq!(a.1, b.1);
        prop_assert!(a.2 == b.2);
    }

    /// A process's move depends only on its closed neighborhood.
    #[test]
    fn moves_ignore_non_neighbors(n in 4u32..14, k in 1u32..5, seed: u64) {
        let (g, alg, cfg) = instance(n, k, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let other = random_config(&g, k, &false_ids(&g, 2), &mut rng);
        for (i, &v) in g.ids().iter().enumerate() {
            let before = alg.next_move(&cfg.view(&g, i));
            let mut edited = cfg.clone();
            for (j, &u) in g.ids().iter().enumerate() {
                if u != v && !g.neighbors(v).unwrap().contains(&u) && rng.gen_bool(0.7) {
                    edited.states_mut()[j] = other.states()[j].clone();
                }
            }
            prop_assert_eq!(before, alg.next_move(&edited.view(&g, i)));
        }
    }

    /// The action that fires is the smallest enabled label.
    #[test]
    fn fired_label_is_the_smallest_enabled(n in 3u32..12, k in 1u32..5, seed: u64) {
        let (g, alg, cfg) = instance(n, k, seed);
        let mut engine = Engine::new(&g, &alg, cfg, DaemonPolicy::random(0.5, seed));
        for _ in 0..300 {
            let before = engine.config().clone();
            let Some(rec) = engine.step().unwrap() else { break };
            for (v, label) in rec.selected.iter().zip(&rec.fired) {
                let listed = runtime::enabled_actions(&g, &before, *v, &alg).unwrap();
                prop_assert_eq!(listed.first(), Some(label));
                prop_assert!(listed.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}

#[test]
fn aging_bounds_waiting_time() {
    for seed in 0..12u64 {
        let (g, alg, cfg) = instance(10 + (seed as u32 % 6), 1 + seed as u32 % 4, seed);
        let n = g.len();
        let mut engine = Engine::new(&g, &alg, cfg, DaemonPolicy::central(Some(seed)));
        let mut waited = vec![0usize; n];
        let mut worst = 0;
        let mut prev: Vec<bool> = engine.enabled().to_vec();
        engine
            .run_observed(20_000, |e, rec| {
                for i in 0..n {
                    let moved = rec.selected.contains(&g.ids()[i]);
                    waited[i] = if prev[i] && e.enabled()[i] && !moved { waited[i] + 1 } else { 0 };
                    worst = worst.max(waited[i]);
                }
                prev = e.enabled().to_vec();
            })
            .unwrap();
        // forced processes are served oldest first, one per step
        assert!(worst <= 2 * n, "seed {seed}: waited {worst} steps with n = {n}");
    }
}

#[test]
fn central_daemon_moves_one_process_per_step() {
    let (g, alg, cfg) = instance(9, 2, 4);
    let (trace, _, _) = runtime::run(&g, &alg, cfg, DaemonPolicy::central(Some(4)), 2000).unwrap();
    assert!(!trace.steps.is_empty());
    assert!(trace.steps.iter().all(|s| s.selected.len() == 1 && s.fired.len() == 1));
}

#[test]
fn synchronous_daemon_moves_every_enabled_process() {
    let (g, alg, cfg) = instance(9, 3, 5);
    let mut engine = Engine::new(&g, &alg, cfg, DaemonPolicy::synchronous());
    for _ in 0..200 {
        let enabled: Vec<_> = g.ids().iter().copied().filter(|&v| engine.is_enabled(v)).collect();
        let Some(rec) = engine.step().unwrap() else { break };
        assert_eq!(rec.selected, enabled);
        assert!(rec.round_end);
    }
    assert_eq!(engine.rounds(), engine.steps());
}
