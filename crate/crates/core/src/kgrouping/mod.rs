//! Minimal k-grouping: partition the network into groups of induced
//! diameter at most `k` such that no two groups can be merged.
//!
//! The initializer builds a first partition from the BFS tree; the merge
//! pass is looped until every pair of near groups is stamped unmergeable.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::compose::{Binding, Loop, LoopBase, LoopLabel, LoopState};
use crate::graph::{Graph, ProcessId};
use crate::runtime::{Configuration, View};

pub mod error;
pub mod init;
pub mod macros;
pub mod merge;
pub mod vars;

pub use init::InitAction;
pub use merge::MergeAction;
pub use vars::{GroupVars, Slot};

pub type GState = LoopState<GroupVars>;
pub type KLabel = LoopLabel<MergeAction, InitAction>;
pub type KLoop = Loop<KGrouping>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KGroupError {
    #[error("diameter bound k must be at least 1")]
    ZeroK,
}

/// The merge pass, its error predicate and its initializer for a fixed `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KGrouping {
    k: u32,
}

impl KGrouping {
    pub fn new(k: u32) -> Result<Self, KGroupError> {
        if k == 0 {
            return Err(KGroupError::ZeroK);
        }
        Ok(KGrouping { k })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// The full looped algorithm for `graph`.
    pub fn looped(self, graph: &Graph) -> KLoop {
        Loop::compose(self, graph.len()).expect("k-grouping binding is well formed")
    }
}

const COPIED: [(&str, &str); 8] = [
    ("group", "in-group"),
    ("groups", "in-groups"),
    ("groupD", "in-groupD"),
    ("stampON", "in-stampON"),
    ("prior", "in-prior"),
    ("stamp1", "in-stamp1"),
    ("stamp2", "in-stamp2"),
    ("stampD", "in-stampD"),
];

impl LoopBase for KGrouping {
    type Vars = GroupVars;
    type ALabel = MergeAction;
    type PLabel = InitAction;

    fn binding(&self) -> Binding {
        Binding {
            a_outputs: COPIED
                .iter()
                .map(|(x, y)| (x.to_string(), y.to_string()))
                .collect(),
            p_outputs: ["domain", "dist", "height", "initGroup"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    fn a_enabled(&self, view: &View<'_, GState>) -> Vec<MergeAction> {
        merge::moves(view, self.k, false).into_iter().map(|(l, _)| l).collect()
    }

    fn a_move(&self, view: &View<'_, GState>) -> Option<(MergeAction, GroupVars)> {
        merge::moves(view, self.k, true).pop()
    }

    fn p_enabled(&self, view: &View<'_, GState>) -> Vec<InitAction> {
        init::moves(view, self.k, false).into_iter().map(|(l, _)| l).collect()
    }

    fn p_move(&self, view: &View<'_, GState>) -> Option<(InitAction, GroupVars)> {
        init::moves(view, self.k, true).pop()
    }

    fn error(&self, view: &View<'_, GState>) -> bool {
        error::error(view, self.k)
    }

    fn outputs_copied(&self, vars: &GroupVars) -> bool {
        vars.outputs_copied()
    }

    fn copy_outputs(&self, vars: &mut GroupVars) {
        vars.copy_outputs()
    }
}

/// Writes `new` into `vars` at every domain key, or returns `None` when
/// nothing would change.
pub(crate) fn rewrite<T: PartialEq>(
    vars: &GroupVars,
    get: impl Fn(&Slot) -> T,
    value: impl Fn(ProcessId) -> T,
    set: impl Fn(&mut Slot, T),
) -> Option<GroupVars> {
    let fresh: Vec<(ProcessId, T)> = vars.domain().map(|u| (u, value(u))).collect();
    if fresh.iter().all(|(u, x)| get(&vars.slots[u]) == *x) {
        return None;
    }
    let mut out = vars.clone();
    for (u, x) in fresh {
        set(out.slots.get_mut(&u).expect("key in domain"), x);
    }
    Some(out)
}

/// Fresh BFS state, color 0, mode A, empty domain, every group variable
/// pointing at the process itself.
pub fn zeroed_config(graph: &Graph) -> Configuration<GState> {
    Configuration::from_fn(graph, |v| LoopState::fresh(v, GroupVars::zeroed(v)))
}

/// Each process's current group (its copied group variable).
pub fn assignment(graph: &Graph, cfg: &Configuration<GState>) -> BTreeMap<ProcessId, ProcessId> {
    graph
        .ids()
        .iter()
        .zip(cfg.states())
        .map(|(&v, s)| (v, s.base.in_group))
        .collect()
}

/// Groups keyed by group id.
pub fn groups_of(assignment: &BTreeMap<ProcessId, ProcessId>) -> BTreeMap<ProcessId, BTreeSet<ProcessId>> {
    let mut out: BTreeMap<ProcessId, BTreeSet<ProcessId>> = BTreeMap::new();
    for (&v, &g) in assignment {
        out.entry(g).or_default().insert(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::{check_cfin, InitOnly};
    use crate::runtime::{run, DaemonPolicy, Verdict};

    fn p(x: u32) -> ProcessId {
        ProcessId(x)
    }

    fn path(n: u32) -> Graph {
        let ids: Vec<u32> = (1..=n).collect();
        let edges: Vec<(u32, u32)> = (1..n).map(|i| (i, i + 1)).collect();
        Graph::from_edges(&ids, &edges).unwrap()
    }

    fn cycle(n: u32) -> Graph {
        let ids: Vec<u32> = (1..=n).collect();
        let edges: Vec<(u32, u32)> = (1..=n).map(|i| (i, i % n + 1)).collect();
        Graph::from_edges(&ids, &edges).unwrap()
    }

    fn set(xs: &[u32]) -> BTreeSet<ProcessId> {
        xs.iter().map(|&x| p(x)).collect()
    }

    /// BFS tree from the smallest id, then the initializer alone.
    fn initialized(g: &Graph, k: u32) -> Configuration<GState> {
        let kg = KGrouping::new(k).unwrap();
        let mut cfg = zeroed_config(g);
        let dist = g.distances_from(g.ids()[0]).unwrap();
        for (i, s) in cfg.states_mut().iter_mut().enumerate() {
            s.bfs.root = g.ids()[0];
            s.bfs.lvl = dist[i];
            s.bfs.parent = g.adj(i).iter().map(|&j| g.id_at(j)).find(|&u| {
                dist[g.index_of(u).unwrap()] + 1 == dist[i]
            });
        }
        let (_, verdict, last) = run(g, &InitOnly(&kg), cfg, DaemonPolicy::synchronous(), 10_000).unwrap();
        assert_eq!(verdict, Verdict::Terminated);
        last
    }

    #[test]
    fn zero_k_rejected() {
        assert_eq!(KGrouping::new(0), Err(KGroupError::ZeroK));
    }

    #[test]
    fn init_on_path_of_five() {
        let g = path(5);
        let cfg = initialized(&g, 2);
        let heights: Vec<u32> = cfg.states().iter().map(|s| s.base.height).collect();
        assert_eq!(heights, vec![0, 1, 0, 1, 0]);
        let groups = groups_of(&assignment(&g, &cfg));
        assert_eq!(
            groups.into_values().collect::<Vec<_>>(),
            vec![set(&[1]), set(&[2, 3]), set(&[4, 5])]
        );
        let kg = KGrouping::new(2).unwrap();
        for i in 0..g.len() {
            assert!(!kg.error(&cfg.view(&g, i)), "error at {}", g.id_at(i));
        }
        // domains are the (k+1)-balls with exact distances
        let s1 = &cfg.states()[0].base;
        assert_eq!(s1.domain().collect::<BTreeSet<_>>(), set(&[1, 2, 3, 4]));
        assert_eq!(s1.get(p(4), |s| s.dist), Some(3));
    }

    #[test]
    fn init_on_single_edge() {
        let g = path(2);
        let cfg = initialized(&g, 2);
        // the leaf has height 0 and joins the root
        assert_eq!(groups_of(&assignment(&g, &cfg)).len(), 1);
    }

    #[test]
    fn corrupted_group_is_detected() {
        let g = path(5);
        let kg = KGrouping::new(2).unwrap();
        let mut cfg = initialized(&g, 2);
        cfg.states_mut()[2].base.in_group = p(77);
        assert!((0..g.len()).any(|i| kg.error(&cfg.view(&g, i))));
    }

    #[test]
    fn bare_stamp_is_detected() {
        let g = path(5);
        let kg = KGrouping::new(2).unwrap();
        let mut cfg = initialized(&g, 2);
        cfg.states_mut()[1].base.slots.get_mut(&p(4)).unwrap().in_stamp_on = true;
        assert!(kg.error(&cfg.view(&g, 1)));
    }

    fn final_groups(g: &Graph, k: u32, daemon: DaemonPolicy) -> Vec<BTreeSet<ProcessId>> {
        let kg = KGrouping::new(k).unwrap();
        let alg = kg.looped(g);
        let (_, verdict, last) = run(g, &alg, zeroed_config(g), daemon, 5_000_000).unwrap();
        assert_eq!(verdict, Verdict::Terminated);
        assert!(check_cfin(g, &kg, &last));
        groups_of(&assignment(g, &last)).into_values().collect()
    }

    #[test]
    fn path_of_five_final_grouping() {
        for daemon in [DaemonPolicy::synchronous(), DaemonPolicy::random(0.5, 7)] {
            assert_eq!(final_groups(&path(5), 2, daemon), vec![set(&[1, 2, 3]), set(&[4, 5])]);
        }
    }

    #[test]
    fn six_cycle_final_grouping() {
        // the BFS tree splits the cycle into branches of length 3 and 2, so
        // the initial groups are three adjacent pairs; any two of them
        // induce a 4-path of diameter 3 and cannot merge
        let g = cycle(6);
        assert_eq!(
            groups_of(&assignment(&g, &initialized(&g, 2))).into_values().collect::<Vec<_>>(),
            vec![set(&[1, 2]), set(&[3, 4]), set(&[5, 6])]
        );
        for daemon in [DaemonPolicy::synchronous(), DaemonPolicy::central(Some(5))] {
            assert_eq!(
                final_groups(&g, 2, daemon),
                vec![set(&[1, 2]), set(&[3, 4]), set(&[5, 6])]
            );
        }
    }
}
