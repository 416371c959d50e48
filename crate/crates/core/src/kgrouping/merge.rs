//! One merge pass: every group picks a target among its near groups, checks
//! whether their union still has diameter at most `k`, and either merges
//! with a mutual target or records a stamp that rules the pair out.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::ProcessId;

use super::macros::{clamp, distance, group_min, in_group, same_group, share, GView};
use super::{rewrite, GroupVars, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MergeAction {
    Border,
    Far,
    Target,
    MergeD,
    Stamp1,
    StampD,
    Stamp2,
    Group,
    Groups,
    GroupD,
    Merging,
    StampOn,
    Prior,
}

impl MergeAction {
    pub const ALL: [MergeAction; 13] = [
        MergeAction::Border,
        MergeAction::Far,
        MergeAction::Target,
        MergeAction::MergeD,
        MergeAction::Stamp1,
        MergeAction::StampD,
        MergeAction::Stamp2,
        MergeAction::Group,
        MergeAction::Groups,
        MergeAction::GroupD,
        MergeAction::Merging,
        MergeAction::StampOn,
        MergeAction::Prior,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }
}

impl fmt::Display for MergeAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.number())
    }
}

/// Local quantities derived once per evaluation.
pub struct Local<'v, 'a> {
    pub view: &'v GView<'a>,
    pub k: u32,
    pub me: &'a GroupVars,
    pub id: ProcessId,
    pub leader: ProcessId,
    pub target: Option<ProcessId>,
}

impl<'v, 'a> Local<'v, 'a> {
    pub fn new(view: &'v GView<'a>, k: u32) -> Self {
        let me = &view.state().base;
        let mut l = Local {
            view,
            k,
            me,
            id: view.id(),
            leader: me.in_group,
            target: None,
        };
        l.target = l.compute_target();
        l
    }

    fn is_candidate(&self, u: ProcessId, s: &Slot) -> bool {
        u != self.leader && s.border.is_some() && s.far.is_none() && !s.in_stamp_on
    }

    /// Near groups not yet stamped as unmergeable.
    pub fn candidates(&self) -> impl Iterator<Item = (ProcessId, &'a Slot)> + '_ {
        self.me.slots.iter().map(|(&u, s)| (u, s)).filter(|(u, s)| self.is_candidate(*u, s))
    }

    fn compute_target(&self) -> Option<ProcessId> {
        self.candidates()
            .find(|(_, s)| s.in_prior)
            .or_else(|| self.candidates().next())
            .map(|(u, _)| u)
    }

    fn merge_dist(&self, u: ProcessId) -> Option<u32> {
        let other = if self.me.get(u, |s| s.in_groups) == Some(self.leader) {
            self.target
        } else {
            self.me.get(u, |s| s.in_groups)
        };
        let over = self.view.neighbors().filter(|(_, w)| {
            w.base.in_group == self.leader || Some(w.base.in_group) == other
        });
        distance(self.view, u, |b, u| b.get(u, |s| s.merge_d), over)
    }

    fn detector(&self, u: ProcessId) -> bool {
        self.me.get(u, |s| s.target) == Some(self.leader)
            && (self.leader <= u || self.target != Some(u))
    }

    pub fn stamp1(&self, u: ProcessId) -> Option<ProcessId> {
        if self.detector(u) {
            let k1 = self.k + 1;
            let found = self
                .me
                .members_of(u)
                .any(|w| self.me.get(w, |s| s.merge_d) == Some(k1));
            group_min(self.view, |b| b.get(u, |s| s.stamp1), found)
        } else if self.me.flag(u, |s| s.in_stamp_on) {
            self.me.get(u, |s| s.in_stamp1)
        } else {
            None
        }
    }

    /// Unclamped stamp distance.
    pub fn stamp_d(&self, u: ProcessId) -> Option<u32> {
        if self.stamp1(u) == Some(self.id) {
            return Some(0);
        }
        let l = self.leader;
        same_group(self.view)
            .filter_map(|(_, w)| w.base.get(u, |s| s.stamp_d))
            .chain(in_group(self.view, u).filter_map(|(_, w)| w.base.get(l, |s| s.stamp_d)))
            .min()
            .map(|d| d + 1)
    }

    /// The group and its target chose each other and found no witness of
    /// unmergeability.
    pub fn merging(&self) -> bool {
        self.target.is_some_and(|t| {
            let s = &self.me.slots[&t];
            s.target == Some(self.leader) && s.stamp_d.is_none()
        })
    }

    pub fn group(&self) -> ProcessId {
        match self.target {
            Some(t) if self.merging() => self.leader.min(t),
            _ => self.leader,
        }
    }

    /// Every near group is stamped.
    pub fn saturated(&self) -> bool {
        self.me
            .slots
            .iter()
            .filter(|(&u, s)| u != self.leader && s.border.is_some() && s.far.is_none())
            .all(|(_, s)| s.stamp_on)
    }

    pub fn prior(&self) -> bool {
        self.merging() || (self.me.flag(self.id, |s| s.in_prior) && !self.saturated())
    }
}

fn evaluate(l: &Local<'_, '_>, action: MergeAction) -> Option<GroupVars> {
    let view = l.view;
    let me = l.me;
    let k = l.k;
    let k1 = k + 1;
    match action {
        MergeAction::Border => rewrite(
            me,
            |s| s.border,
            |u| group_min(view, |b| b.get(u, |s| s.border), in_group(view, u).next().is_some()),
            |s, x| s.border = x,
        ),
        MergeAction::Far => rewrite(
            me,
            |s| s.far,
            |u| {
                let reach = me.members_of(u).any(|w| me.get(w, |s| s.dist) == Some(k1));
                group_min(view, |b| b.get(u, |s| s.far), reach)
            },
            |s, x| s.far = x,
        ),
        MergeAction::Target => rewrite(
            me,
            |s| s.target,
            |u| share(view, u, |b, u| b.get(u, |s| s.target), l.target),
            |s, x| s.target = x,
        ),
        MergeAction::MergeD => rewrite(me, |s| s.merge_d, |u| clamp(l.merge_dist(u), k), |s, x| s.merge_d = x),
        MergeAction::Stamp1 => rewrite(me, |s| s.stamp1, |u| l.stamp1(u), |s, x| s.stamp1 = x),
        MergeAction::StampD => rewrite(me, |s| s.stamp_d, |u| clamp(l.stamp_d(u), k), |s, x| s.stamp_d = x),
        MergeAction::Stamp2 => rewrite(
            me,
            |s| s.stamp2,
            |u| group_min(view, |b| b.get(u, |s| s.stamp2), l.stamp_d(u) == Some(k1)),
            |s, x| s.stamp2 = x,
        ),
        MergeAction::Group => {
            let g = l.group();
            (me.group != g).then(|| GroupVars { group: g, ..me.clone() })
        }
        MergeAction::Groups => rewrite(
            me,
            |s| s.groups,
            |u| share(view, u, |b, u| b.get(u, |s| s.groups), Some(me.group)),
            |s, x| s.groups = x,
        ),
        MergeAction::GroupD => rewrite(
            me,
            |s| s.group_d,
            |u| {
                let over = view.neighbors().filter(|(_, w)| w.base.group == me.group);
                clamp(distance(view, u, |b, u| b.get(u, |s| s.group_d), over), k)
            },
            |s, x| s.group_d = x,
        ),
        MergeAction::Merging => {
            let m = l.merging();
            rewrite(
                me,
                |s| s.merging,
                |u| share(view, u, |b, u| b.get(u, |s| Some(s.merging)), Some(m)).unwrap_or(false),
                |s, x| s.merging = x,
            )
        }
        MergeAction::StampOn => {
            let m = l.merging();
            rewrite(
                me,
                |s| s.stamp_on,
                |u| {
                    let s = &me.slots[&u];
                    s.stamp_d.is_some() && !m && !s.merging
                },
                |s, x| s.stamp_on = x,
            )
        }
        MergeAction::Prior => {
            let p = l.prior();
            rewrite(
                me,
                |s| s.prior,
                |u| share(view, u, |b, u| b.get(u, |s| Some(s.prior)), Some(p)).unwrap_or(false),
                |s, x| s.prior = x,
            )
        }
    }
}

/// Evaluates the actions in label order; with `first_only`, stops at the
/// first enabled one.
pub fn moves(view: &GView<'_>, k: u32, first_only: bool) -> Vec<(MergeAction, GroupVars)> {
    let l = Local::new(view, k);
    let mut out = Vec::new();
    for action in MergeAction::ALL {
        if let Some(vars) = evaluate(&l, action) {
            out.push((action, vars));
            if first_only {
                break;
            }
        }
    }
    out
}
