//! Silent BFS spanning tree rooted at the minimum identifier.
//!
//! Each process tracks the smallest root it has heard of and its distance to
//! it. Levels are capped at `n - 1`, so a root id that does not exist keeps
//! growing levels until every copy of it is flushed.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{Graph, ProcessId};
use crate::runtime::{Algorithm, Configuration, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BfsVars {
    pub root: ProcessId,
    pub lvl: u32,
    pub parent: Option<ProcessId>,
}

impl BfsVars {
    /// A process that believes it is the root.
    pub fn rooted(id: ProcessId) -> Self {
        BfsVars {
            root: id,
            lvl: 0,
            parent: None,
        }
    }
}

impl AsRef<BfsVars> for BfsVars {
    fn as_ref(&self) -> &BfsVars {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BfsLabel {
    /// Level out of range: reset to a self-rooted state.
    Flush,
    /// No neighbor offers a smaller root: become a root.
    BecomeRoot,
    /// Take the best neighbor as parent.
    Adopt,
}

impl fmt::Display for BfsLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BfsLabel::Flush => "flush",
            BfsLabel::BecomeRoot => "become-root",
            BfsLabel::Adopt => "adopt",
        })
    }
}

/// The BFS variables `v` should hold given its neighbors.
pub fn target<S: AsRef<BfsVars>>(view: &View<'_, S>, n: usize) -> BfsVars {
    let cap = n.saturating_sub(1) as u32;
    let mut best = BfsVars::rooted(view.id());
    for (u, s) in view.neighbors() {
        let b = s.as_ref();
        if b.lvl >= cap {
            continue;
        }
        let cand = (b.root, b.lvl + 1);
        // neighbors come in ascending id order, so strict comparison keeps the min-id parent
        if cand < (best.root, best.lvl) {
            best = BfsVars {
                root: b.root,
                lvl: b.lvl + 1,
                parent: Some(u),
            };
        }
    }
    best
}

/// The BFS action enabled at `v`, if any.
pub fn bfs_move<S: AsRef<BfsVars>>(view: &View<'_, S>, n: usize) -> Option<(BfsLabel, BfsVars)> {
    let cur = *view.state().as_ref();
    if cur.lvl as usize >= n {
        return Some((BfsLabel::Flush, BfsVars::rooted(view.id())));
    }
    let t = target(view, n);
    if t == cur {
        None
    } else if t.parent.is_none() {
        Some((BfsLabel::BecomeRoot, t))
    } else {
        Some((BfsLabel::Adopt, t))
    }
}

/// `Par(v)`: the parent if it is a neighbor, else empty.
pub fn par<S: AsRef<BfsVars>>(view: &View<'_, S>) -> Option<ProcessId> {
    let p = view.state().as_ref().parent?;
    view.neighbor(p).map(|_| p)
}

/// `Chi(v)`: neighbors whose parent is `v`.
pub fn chi<'a, S: AsRef<BfsVars>>(view: &View<'a, S>) -> impl Iterator<Item = (ProcessId, &'a S)> + 'a {
    let me = view.id();
    view.neighbors()
        .filter(move |(_, s)| s.as_ref().parent == Some(me))
}

/// The BFS module on its own.
#[derive(Debug, Clone, Copy)]
pub struct Bfs {
    pub n: usize,
}

impl Bfs {
    pub fn for_graph(graph: &Graph) -> Self {
        Bfs { n: graph.len() }
    }
}

impl Algorithm for Bfs {
    type State = BfsVars;
    type Label = BfsLabel;

    fn enabled_actions(&self, view: &View<'_, BfsVars>) -> Vec<BfsLabel> {
        bfs_move(view, self.n).map(|(l, _)| l).into_iter().collect()
    }

    fn next_move(&self, view: &View<'_, BfsVars>) -> Option<(BfsLabel, BfsVars)> {
        bfs_move(view, self.n)
    }
}

/// Checks that the BFS variables form a BFS tree rooted at the minimum id.
pub fn is_legitimate<S: AsRef<BfsVars>>(graph: &Graph, cfg: &Configuration<S>) -> bool {
    let r = graph.ids()[0];
    let dist = graph.distances_from(r).expect("root is a vertex");
    for (i, s) in cfg.states().iter().enumerate() {
        let b = s.as_ref();
        let v = graph.id_at(i);
        let d = dist[i];
        if b.root != r || b.lvl != d {
            return false;
        }
        match b.parent {
            None if v == r => {}
            Some(p) if v != r => {
                if !graph.has_edge(v, p) {
                    return false;
                }
                let pi = graph.index_of(p).expect("neighbor exists");
                if cfg.states()[pi].as_ref().lvl + 1 != b.lvl {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

/// Children of `v` in configuration `cfg`.
pub fn children<S: AsRef<BfsVars>>(graph: &Graph, cfg: &Configuration<S>, v: ProcessId) -> BTreeSet<ProcessId> {
    cfg.view_of(graph, v)
        .map(|view| chi(&view).map(|(u, _)| u).collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{run, DaemonPolicy, Verdict};

    fn zeroed(g: &Graph) -> Configuration<BfsVars> {
        Configuration::from_fn(g, BfsVars::rooted)
    }

    #[test]
    fn path_from_zeroed() {
        let g = Graph::from_edges(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let (_, verdict, last) =
            run(&g, &Bfs::for_graph(&g), zeroed(&g), DaemonPolicy::synchronous(), 100).unwrap();
        assert_eq!(verdict, Verdict::Terminated);
        let s = last.states();
        assert_eq!(s.iter().map(|b| b.parent).collect::<Vec<_>>(), vec![None, Some(ProcessId(1)), Some(ProcessId(2))]);
        assert_eq!(s.iter().map(|b| b.lvl).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(is_legitimate(&g, &last));
    }

    #[test]
    fn single_edge_every_small_config() {
        let g = Graph::from_edges(&[5, 9], &[(5, 9)]).unwrap();
        let roots = [0, 5, 9, 11];
        let parents = [None, Some(ProcessId(5)), Some(ProcessId(9))];
        for &r1 in &roots {
            for &r2 in &roots {
                for l1 in 0..3 {
                    for l2 in 0..3 {
                        for p1 in parents {
                            for p2 in parents {
                                let cfg = Configuration::from_vec(
                                    &g,
                                    vec![
                                        BfsVars { root: ProcessId(r1), lvl: l1, parent: p1 },
                                        BfsVars { root: ProcessId(r2), lvl: l2, parent: p2 },
                                    ],
                                )
                                .unwrap();
                                let (_, verdict, last) = run(
                                    &g,
                                    &Bfs::for_graph(&g),
                                    cfg,
                                    DaemonPolicy::central(None),
                                    1000,
                                )
                                .unwrap();
                                assert_eq!(verdict, Verdict::Terminated);
                                assert!(is_legitimate(&g, &last));
                                assert_eq!(last.states()[1].parent, Some(ProcessId(5)));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn fake_root_is_flushed() {
        let g = Graph::from_edges(&[3, 5, 7, 9], &[(3, 5), (5, 7), (7, 9), (9, 3)]).unwrap();
        let fake = |lvl, parent| BfsVars { root: ProcessId(0), lvl, parent };
        let cfg = Configuration::from_vec(
            &g,
            vec![
                fake(1, Some(ProcessId(5))),
                fake(0, None),
                fake(1, Some(ProcessId(5))),
                fake(2, Some(ProcessId(7))),
            ],
        )
        .unwrap();
        let (_, verdict, last) =
            run(&g, &Bfs::for_graph(&g), cfg, DaemonPolicy::synchronous(), 1000).unwrap();
        assert_eq!(verdict, Verdict::Terminated);
        assert!(last.states().iter().all(|b| b.root == ProcessId(3)));
        assert!(is_legitimate(&g, &last));
    }

    #[test]
    fn par_and_chi() {
        let g = Graph::from_edges(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let cfg = Configuration::from_vec(
            &g,
            vec![
                BfsVars::rooted(ProcessId(1)),
                BfsVars { root: ProcessId(1), lvl: 1, parent: Some(ProcessId(1)) },
                BfsVars { root: ProcessId(1), lvl: 2, parent: Some(ProcessId(2)) },
            ],
        )
        .unwrap();
        assert_eq!(par(&cfg.view(&g, 0)), None);
        assert_eq!(par(&cfg.view(&g, 2)), Some(ProcessId(2)));
        assert_eq!(children(&g, &cfg, ProcessId(2)), BTreeSet::from([ProcessId(3)]));
        assert!(children(&g, &cfg, ProcessId(3)).is_empty());
        // a parent pointer to a non-neighbor is no parent at all
        let mut bad = cfg.clone();
        bad.states_mut()[2].parent = Some(ProcessId(1));
        assert_eq!(par(&bad.view(&g, 2)), None);
    }

    #[test]
    fn silent_once_legitimate() {
        let g = Graph::from_edges(&[1, 2, 3, 4], &[(1, 2), (2, 3), (3, 4), (4, 1)]).unwrap();
        let (_, _, last) =
            run(&g, &Bfs::for_graph(&g), zeroed(&g), DaemonPolicy::synchronous(), 100).unwrap();
        let alg = Bfs::for_graph(&g);
        for i in 0..g.len() {
            assert!(alg.next_move(&last.view(&g, i)).is_none());
        }
    }
}
