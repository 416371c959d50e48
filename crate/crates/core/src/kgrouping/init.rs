//! Initialization: neighborhood tables, BFS-height based initial groups, and
//! the copied inputs the merge layer starts from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bfs;
use crate::graph::ProcessId;

use super::macros::{clamp, distance, same_group, share, GView};
use super::{rewrite, GroupVars};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InitAction {
    Domain,
    Dist,
    Height,
    InitGroup,
    InGroup,
    InGroups,
    InGroupD,
    InStampOn,
    InPrior,
}

impl InitAction {
    pub const ALL: [InitAction; 9] = [
        InitAction::Domain,
        InitAction::Dist,
        InitAction::Height,
        InitAction::InitGroup,
        InitAction::InGroup,
        InitAction::InGroups,
        InitAction::InGroupD,
        InitAction::InStampOn,
        InitAction::InPrior,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }
}

impl fmt::Display for InitAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I{}", self.number())
    }
}

/// Hop distance to `u` learned from neighbors that know `u`.
pub fn dist_to(view: &GView<'_>, u: ProcessId) -> Option<u32> {
    distance(
        view,
        u,
        |b, u| b.get(u, |s| s.dist),
        view.neighbors().filter(|(_, w)| w.base.in_domain(u)),
    )
}

/// Every id within `k + 1` hops, as far as the neighbors' tables tell.
pub fn domain_of(view: &GView<'_>, k: u32) -> BTreeSet<ProcessId> {
    let mut seen: BTreeSet<ProcessId> = BTreeSet::from([view.id()]);
    for (_, w) in view.neighbors() {
        seen.extend(w.base.domain());
    }
    seen.into_iter()
        .filter(|&u| dist_to(view, u).is_some_and(|d| d <= k + 1))
        .collect()
}

/// `0` at a leaf, otherwise the largest `(h + 1) mod (⌊k/2⌋ + 1)` over the
/// children's heights `h`.
pub fn height_of(view: &GView<'_>, k: u32) -> u32 {
    let m = k / 2 + 1;
    bfs::chi(view)
        .map(|(_, c)| (c.base.height + 1) % m)
        .max()
        .unwrap_or(0)
}

/// The process heads its own group at the BFS root or at height `⌊k/2⌋`;
/// otherwise it joins its parent's group.
pub fn init_group_of(view: &GView<'_>, k: u32) -> ProcessId {
    let me = &view.state().base;
    match bfs::par(view).and_then(|p| view.neighbor(p)) {
        Some(parent) if me.height != k / 2 => parent.base.init_group,
        _ => view.id(),
    }
}

/// Evaluates the actions in label order and returns the enabled ones with
/// their results; with `first_only`, stops at the first.
pub fn moves(view: &GView<'_>, k: u32, first_only: bool) -> Vec<(InitAction, GroupVars)> {
    let me = &view.state().base;
    let mut out = Vec::new();
    for action in InitAction::ALL {
        let next = match action {
            InitAction::Domain => {
                let want = domain_of(view, k);
                if me.slots.keys().eq(want.iter()) {
                    None
                } else {
                    let mut v = me.clone();
                    let mut old = std::mem::take(&mut v.slots);
                    v.slots = want
                        .into_iter()
                        .map(|u| (u, old.remove(&u).unwrap_or_default()))
                        .collect::<BTreeMap<_, _>>();
                    Some(v)
                }
            }
            InitAction::Dist => rewrite(me, |s| s.dist, |u| clamp(dist_to(view, u), k), |s, x| s.dist = x),
            InitAction::Height => {
                let h = height_of(view, k);
                (me.height != h).then(|| GroupVars { height: h, ..me.clone() })
            }
            InitAction::InitGroup => {
                let g = init_group_of(view, k);
                (me.init_group != g).then(|| GroupVars { init_group: g, ..me.clone() })
            }
            InitAction::InGroup => {
                let g = init_group_of(view, k);
                (me.in_group != g).then(|| GroupVars { in_group: g, ..me.clone() })
            }
            InitAction::InGroups => rewrite(
                me,
                |s| s.in_groups,
                |u| share(view, u, |b, u| b.get(u, |s| s.in_groups), Some(me.in_group)),
                |s, x| s.in_groups = x,
            ),
            InitAction::InGroupD => rewrite(
                me,
                |s| s.in_group_d,
                |u| clamp(distance(view, u, |b, u| b.get(u, |s| s.in_group_d), same_group(view)), k),
                |s, x| s.in_group_d = x,
            ),
            InitAction::InStampOn => rewrite(me, |s| s.in_stamp_on, |_| false, |s, x| s.in_stamp_on = x),
            InitAction::InPrior => rewrite(me, |s| s.in_prior, |_| false, |s, x| s.in_prior = x),
        };
        if let Some(vars) = next {
            out.push((action, vars));
            if first_only {
                break;
            }
        }
    }
    out
}
