//! The three neighborhood aggregations shared by initialization, merging
//! and error detection.

use crate::graph::ProcessId;
use crate::runtime::View;

use super::{GState, GroupVars};

pub type GView<'a> = View<'a, GState>;

/// Copies a value along shortest paths: `own` at `u` itself, otherwise the
/// smallest value held for `u` by a neighbor one hop closer to `u`.
pub fn share<T: Ord + Copy>(
    view: &GView<'_>,
    u: ProcessId,
    read: impl Fn(&GroupVars, ProcessId) -> Option<T>,
    own: Option<T>,
) -> Option<T> {
    if u == view.id() {
        return own;
    }
    let d = view.state().base.get(u, |s| s.dist)?;
    if d == 0 {
        return None;
    }
    view.neighbors()
        .filter(|(_, w)| w.base.get(u, |s| s.dist) == Some(d - 1))
        .filter_map(|(_, w)| read(&w.base, u))
        .min()
}

/// `S_v`: neighbors whose copied group equals the process's own.
pub fn same_group<'a>(view: &GView<'a>) -> impl Iterator<Item = (ProcessId, &'a GState)> + 'a {
    let l = view.state().base.in_group;
    view.neighbors().filter(move |(_, w)| w.base.in_group == l)
}

/// `N_v(u)`: neighbors whose copied group is `u`.
pub fn in_group<'a>(view: &GView<'a>, u: ProcessId) -> impl Iterator<Item = (ProcessId, &'a GState)> + 'a {
    view.neighbors().filter(move |(_, w)| w.base.in_group == u)
}

/// Group-wide minimum: the smallest member of the process's group for which
/// the predicate holds. Values travel only toward decreasing in-group
/// distance from the value itself, so stale values drain away.
pub fn group_min(
    view: &GView<'_>,
    read: impl Fn(&GroupVars) -> Option<ProcessId>,
    holds: bool,
) -> Option<ProcessId> {
    let me = &view.state().base;
    let w = same_group(view)
        .filter_map(|(_, s)| {
            let b = read(&s.base)?;
            let mine = me.get(b, |x| x.in_group_d)?;
            let theirs = s.base.get(b, |x| x.in_group_d)?;
            (mine == theirs + 1).then_some(b)
        })
        .min();
    if holds {
        Some(w.map_or(view.id(), |w| w.min(view.id())))
    } else {
        w
    }
}

/// `0` at `u` itself, else one more than the smallest value held for `u`
/// by the given neighbors.
pub fn distance<'a>(
    view: &GView<'a>,
    u: ProcessId,
    read: impl Fn(&GroupVars, ProcessId) -> Option<u32>,
    over: impl Iterator<Item = (ProcessId, &'a GState)>,
) -> Option<u32> {
    if u == view.id() {
        return Some(0);
    }
    over.filter_map(|(_, w)| read(&w.base, u)).min().map(|d| d + 1)
}

/// Array-write rule for distance ranges `[0, 2k]`.
pub fn clamp(d: Option<u32>, k: u32) -> Option<u32> {
    d.filter(|&x| x <= 2 * k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::LoopState;
    use crate::graph::Graph;
    use crate::kgrouping::Slot;
    use crate::runtime::Configuration;

    fn p(x: u32) -> ProcessId {
        ProcessId(x)
    }

    fn cfg(g: &Graph) -> Configuration<GState> {
        Configuration::from_fn(g, |v| LoopState::fresh(v, GroupVars::zeroed(v)))
    }

    #[test]
    fn share_self_and_empty() {
        let g = Graph::from_edges(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let c = cfg(&g);
        let v = c.view(&g, 0);
        assert_eq!(share(&v, p(1), |b, u| b.get(u, |s| s.groups), Some(p(9))), Some(p(9)));
        // no distances known: nobody is one hop closer
        assert_eq!(share(&v, p(3), |b, u| b.get(u, |s| s.groups), Some(p(9))), None);
    }

    #[test]
    fn share_along_path() {
        let g = Graph::from_edges(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let mut c = cfg(&g);
        for (i, s) in c.states_mut().iter_mut().enumerate() {
            for u in 1..=3u32 {
                let d = (i as i64 - (u as i64 - 1)).unsigned_abs() as u32;
                s.base.slots.insert(p(u), Slot { dist: Some(d), ..Slot::default() });
            }
        }
        // process 3's group is 3; process 2 has copied it, so 1 reads it via 2
        c.states_mut()[1].base.slots.get_mut(&p(3)).unwrap().groups = Some(p(3));
        let v = c.view(&g, 0);
        assert_eq!(share(&v, p(3), |b, u| b.get(u, |s| s.groups), None), Some(p(3)));
    }

    #[test]
    fn group_min_singleton() {
        let g = Graph::from_edges(&[1, 2], &[(1, 2)]).unwrap();
        let c = cfg(&g);
        let v = c.view(&g, 0);
        assert_eq!(group_min(&v, |b| Some(b.group), true), Some(p(1)));
        assert_eq!(group_min(&v, |b| Some(b.group), false), None);
    }

    #[test]
    fn group_min_pair_converges() {
        // group {3,7}: predicate holds only at 7
        let g = Graph::from_edges(&[3, 7], &[(3, 7)]).unwrap();
        let mut c = cfg(&g);
        for s in c.states_mut() {
            s.base.in_group = p(3);
        }
        for (i, s) in c.states_mut().iter_mut().enumerate() {
            s.base.slots.insert(p(3), Slot { in_group_d: Some(i as u32), ..Slot::default() });
            s.base.slots.insert(p(7), Slot { in_group_d: Some(1 - i as u32), ..Slot::default() });
        }
        let holds = [false, true];
        let mut vals = [None, None];
        for _ in 0..3 {
            let mut next = vals;
            for i in 0..2 {
                let mut view_cfg = c.clone();
                for (j, s) in view_cfg.states_mut().iter_mut().enumerate() {
                    s.base.slots.get_mut(&p(7)).unwrap().far = vals[j];
                }
                let v = view_cfg.view(&g, i);
                next[i] = group_min(&v, |b| b.get(p(7), |s| s.far), holds[i]);
            }
            vals = next;
        }
        assert_eq!(vals, [Some(p(7)), Some(p(7))]);
    }

    #[test]
    fn distance_cases() {
        let g = Graph::from_edges(&[1, 2], &[(1, 2)]).unwrap();
        let c = cfg(&g);
        let v = c.view(&g, 0);
        assert_eq!(distance(&v, p(1), |b, u| b.get(u, |s| s.dist), v.neighbors()), Some(0));
        assert_eq!(distance(&v, p(2), |b, u| b.get(u, |s| s.dist), std::iter::empty()), None);
        assert_eq!(clamp(Some(5), 2), None);
        assert_eq!(clamp(Some(4), 2), Some(4));
    }
}
