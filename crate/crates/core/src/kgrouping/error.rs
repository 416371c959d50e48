//! Local error detection over the initializer outputs and copied inputs.

use crate::graph::ProcessId;

use super::init::{dist_to, domain_of, height_of, init_group_of};
use super::macros::{clamp, distance, in_group, same_group, share, GView};

/// Neighbors in the same initial group must agree on the copied group.
pub fn group_ok(view: &GView<'_>) -> bool {
    let me = &view.state().base;
    view.neighbors()
        .all(|(_, u)| u.base.init_group != me.init_group || u.base.in_group == me.in_group)
}

/// Copied group table matches what shortest paths deliver, and the process's
/// own group lists its leader.
pub fn groups_ok(view: &GView<'_>) -> bool {
    let me = &view.state().base;
    let l = me.in_group;
    me.slots.iter().all(|(&u, s)| {
        s.in_groups == share(view, u, |b, u| b.get(u, |s| s.in_groups), Some(l))
    }) && me.get(l, |s| s.in_groups) == Some(l)
}

/// In-group distances are consistent and never reach `k + 1`.
pub fn group_dist_ok(view: &GView<'_>, k: u32) -> bool {
    let me = &view.state().base;
    let l = me.in_group;
    me.members_of(l).all(|u| {
        let stored = me.get(u, |s| s.in_group_d);
        let fresh = clamp(distance(view, u, |b, u| b.get(u, |s| s.in_group_d), same_group(view)), k);
        stored == fresh && stored != Some(k + 1)
    })
}

/// A copied stamp against group `u` is internally consistent on both sides
/// of the border.
pub fn stamp_ok(view: &GView<'_>, u: ProcessId, k: u32) -> bool {
    let me = &view.state().base;
    let v = view.id();
    let l = me.in_group;
    let s1 = me.get(u, |s| s.in_stamp1);
    let s2 = me.get(u, |s| s.in_stamp2);
    let sd = me.get(u, |s| s.in_stamp_d);

    if !same_group(view).all(|(_, w)| w.base.flag(u, |s| s.in_stamp_on)) {
        return false;
    }
    if !in_group(view, u).all(|(_, w)| w.base.flag(l, |s| s.in_stamp_on)) {
        return false;
    }
    if (s1.is_none() && s2.is_none()) || sd.is_none() {
        return false;
    }
    if s2.is_none() && !in_group(view, u).all(|(_, w)| w.base.get(l, |s| s.in_stamp2).is_some()) {
        return false;
    }
    if !same_group(view)
        .all(|(_, w)| (s1, s2) == (w.base.get(u, |s| s.in_stamp1), w.base.get(u, |s| s.in_stamp2)))
    {
        return false;
    }
    if s2 == Some(v) && sd != Some(k + 1) {
        return false;
    }
    for s in [s1, s2].into_iter().flatten() {
        if me.get(s, |x| x.in_groups) != Some(l) {
            return false;
        }
    }
    if (s1, s2, sd) != (Some(v), None, Some(0)) {
        let near = same_group(view)
            .filter_map(|(_, w)| w.base.get(u, |s| s.in_stamp_d))
            .chain(in_group(view, u).filter_map(|(_, w)| w.base.get(l, |s| s.in_stamp_d)))
            .min();
        if sd != near.map(|d| d + 1) {
            return false;
        }
    }
    true
}

/// True when the process sees an inconsistency that the initializer must
/// repair.
pub fn error(view: &GView<'_>, k: u32) -> bool {
    let me = &view.state().base;
    if !me.slots.keys().eq(domain_of(view, k).iter()) {
        return true;
    }
    if me.slots.iter().any(|(&u, s)| s.dist != clamp(dist_to(view, u), k)) {
        return true;
    }
    if me.height != height_of(view, k) || me.init_group != init_group_of(view, k) {
        return true;
    }
    if !group_ok(view) || !groups_ok(view) || !group_dist_ok(view, k) {
        return true;
    }
    if me
        .slots
        .iter()
        .any(|(&u, s)| s.in_stamp_on && !stamp_ok(view, u, k))
    {
        return true;
    }
    // neighbors agree on copied priorities for every common key
    view.neighbors().any(|(_, w)| {
        me.slots.iter().any(|(u, s)| {
            w.base
                .slots
                .get(u)
                .is_some_and(|t| t.in_prior != s.in_prior)
        })
    })
}
