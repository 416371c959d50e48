//! Ground truth computed from the graph alone, used to judge runs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError, Hops, ProcessId};
use crate::kgrouping::GState;
use crate::runtime::Configuration;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("groups overlap at {0}")]
    Overlap(ProcessId),
    #[error("exhaustive search supports at most {max} processes, got {got}")]
    TooLarge { got: usize, max: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingReport {
    pub groups: BTreeMap<ProcessId, BTreeSet<ProcessId>>,
    pub per_group_diameter: BTreeMap<ProcessId, Hops>,
    pub mergeable_pairs: BTreeSet<(ProcessId, ProcessId)>,
    pub group_count: usize,
    pub verdict: bool,
    pub violations: Vec<String>,
}

fn union(g1: &BTreeSet<ProcessId>, g2: &BTreeSet<ProcessId>) -> Result<BTreeSet<ProcessId>, OracleError> {
    if let Some(&v) = g1.intersection(g2).next() {
        return Err(OracleError::Overlap(v));
    }
    Ok(g1.union(g2).copied().collect())
}

/// Some edge joins the two groups and every cross pair is within `k` hops
/// in the whole graph.
pub fn near(graph: &Graph, g1: &BTreeSet<ProcessId>, g2: &BTreeSet<ProcessId>, k: u32) -> Result<bool, OracleError> {
    union(g1, g2)?;
    let adjacent = g1
        .iter()
        .any(|&a| g2.iter().any(|&b| graph.has_edge(a, b)));
    if !adjacent {
        return Ok(false);
    }
    for &a in g1 {
        let d = graph.distances_from(a)?;
        for &b in g2 {
            let j = graph.index_of(b).ok_or(GraphError::UnknownVertex(b))?;
            if d[j] > k {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The union induces a subgraph of diameter at most `k`.
pub fn mergeable(graph: &Graph, g1: &BTreeSet<ProcessId>, g2: &BTreeSet<ProcessId>, k: u32) -> Result<bool, OracleError> {
    let u = union(g1, g2)?;
    Ok(graph.induced_diameter(&u)? <= Hops::Finite(k))
}

/// Judges a group assignment against the minimal k-grouping requirements:
/// a partition of the vertex set into groups of induced diameter at most
/// `k`, no two of which are mergeable.
pub fn check_lk(graph: &Graph, assignment: &BTreeMap<ProcessId, ProcessId>, k: u32) -> GroupingReport {
    let mut violations = Vec::new();
    let mut groups: BTreeMap<ProcessId, BTreeSet<ProcessId>> = BTreeMap::new();
    for &v in graph.ids() {
        match assignment.get(&v) {
            Some(&g) => {
                groups.entry(g).or_default().insert(v);
            }
            None => violations.push(format!("process {v} has no group")),
        }
    }
    for &v in assignment.keys() {
        if !graph.contains(v) {
            violations.push(format!("assignment names unknown process {v}"));
        }
    }
    for &g in groups.keys() {
        if !graph.contains(g) {
            violations.push(format!("group id {g} is not a process"));
        }
    }
    let mut per_group_diameter = BTreeMap::new();
    for (&g, members) in &groups {
        let d = graph.induced_diameter(members).unwrap_or(Hops::Infinite);
        if d > Hops::Finite(k) {
            violations.push(format!("group {g} has diameter {d} > {k}"));
        }
        per_group_diameter.insert(g, d);
    }
    // mergeable groups must be adjacent, so only adjacent pairs are tested
    let mut of: BTreeMap<ProcessId, ProcessId> = BTreeMap::new();
    for (&g, members) in &groups {
        for &v in members {
            of.insert(v, g);
        }
    }
    let mut adjacent: BTreeSet<(ProcessId, ProcessId)> = BTreeSet::new();
    for (a, b) in graph.edges() {
        let (ga, gb) = (of[&a], of[&b]);
        if ga != gb {
            adjacent.insert((ga.min(gb), ga.max(gb)));
        }
    }
    let mut mergeable_pairs = BTreeSet::new();
    for (ga, gb) in adjacent {
        if mergeable(graph, &groups[&ga], &groups[&gb], k).unwrap_or(false) {
            violations.push(format!("groups {ga} and {gb} are mergeable"));
            mergeable_pairs.insert((ga, gb));
        }
    }
    GroupingReport {
        group_count: groups.len(),
        verdict: violations.is_empty(),
        groups,
        per_group_diameter,
        mergeable_pairs,
        violations,
    }
}

/// Reads each process's `group` output and judges it.
pub fn check_lk_config(graph: &Graph, cfg: &Configuration<GState>, k: u32) -> GroupingReport {
    let assignment = graph
        .ids()
        .iter()
        .zip(cfg.states())
        .map(|(&v, s)| (v, s.base.group))
        .collect();
    check_lk(graph, &assignment, k)
}

pub const EXHAUSTIVE_MAX: usize = 12;

/// Fewest groups in any partition whose parts all have induced diameter at
/// most `k`.
pub fn exhaustive_min_groups(graph: &Graph, k: u32) -> Result<usize, OracleError> {
    let n = graph.len();
    if n > EXHAUSTIVE_MAX {
        return Err(OracleError::TooLarge { got: n, max: EXHAUSTIVE_MAX });
    }
    let full = (1usize << n) - 1;
    let ok: Vec<bool> = (0..=full)
        .map(|mask| {
            if mask == 0 {
                return false;
            }
            let set: BTreeSet<ProcessId> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| graph.id_at(i)).collect();
            graph.induced_diameter(&set).is_ok_and(|d| d <= Hops::Finite(k))
        })
        .collect();
    let mut best = vec![usize::MAX; full + 1];
    best[0] = 0;
    for mask in 1..=full {
        // the part holding the lowest remaining vertex
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let part = sub | low;
            if ok[part] && best[mask ^ part] != usize::MAX {
                best[mask] = best[mask].min(best[mask ^ part] + 1);
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    Ok(best[full])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Potential {
    pub groups: usize,
    pub prior: usize,
    pub black: usize,
    pub total: usize,
}

impl Potential {
    pub fn from_counts(groups: usize, prior: usize, black: usize) -> Self {
        Potential {
            groups,
            prior,
            black,
            total: 2 * groups + prior + black,
        }
    }
}

fn copied_groups(graph: &Graph, cfg: &Configuration<GState>) -> BTreeMap<ProcessId, BTreeSet<ProcessId>> {
    let mut out: BTreeMap<ProcessId, BTreeSet<ProcessId>> = BTreeMap::new();
    for (&v, s) in graph.ids().iter().zip(cfg.states()) {
        out.entry(s.base.in_group).or_default().insert(v);
    }
    out
}

fn leader_state<'a>(graph: &Graph, cfg: &'a Configuration<GState>, g: ProcessId) -> Option<&'a GState> {
    cfg.get(graph, g)
}

/// Merge-progress measure over the copied group variables: twice the group
/// count, plus prior groups, plus black groups (non-prior groups with a
/// non-prior, unstamped near group).
pub fn potential(graph: &Graph, cfg: &Configuration<GState>, k: u32) -> Potential {
    let groups = copied_groups(graph, cfg);
    let is_prior = |g: ProcessId| leader_state(graph, cfg, g).is_some_and(|s| s.base.flag(g, |x| x.in_prior));
    let prior = groups.keys().filter(|&&g| is_prior(g)).count();
    let black = groups
        .iter()
        .filter(|(&g, _)| !is_prior(g))
        .filter(|(&g, members)| {
            let stamped = |u: ProcessId| leader_state(graph, cfg, g).is_some_and(|s| s.base.flag(u, |x| x.in_stamp_on));
            groups.iter().any(|(&u, other)| {
                u != g && !is_prior(u) && !stamped(u) && near(graph, members, other, k).unwrap_or(false)
            })
        })
        .count();
    Potential::from_counts(groups.len(), prior, black)
}

/// Near group pairs `(i, j)` where some member of group `i` holds an active
/// copied stamp against `j` although the two groups are mergeable.
pub fn unsound_stamps(graph: &Graph, cfg: &Configuration<GState>, k: u32) -> Vec<(ProcessId, ProcessId)> {
    let groups = copied_groups(graph, cfg);
    let mut out = Vec::new();
    for (&i, gi) in &groups {
        for (&j, gj) in &groups {
            if i == j {
                continue;
            }
            let stamped = gi.iter().any(|&v| {
                cfg.get(graph, v).is_some_and(|s| s.base.flag(j, |x| x.in_stamp_on))
            });
            if stamped && near(graph, gi, gj, k).unwrap_or(false) && mergeable(graph, gi, gj, k).unwrap_or(false) {
                out.push((i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[u32]) -> BTreeSet<ProcessId> {
        xs.iter().map(|&x| ProcessId(x)).collect()
    }

    fn assign(parts: &[&[u32]]) -> BTreeMap<ProcessId, ProcessId> {
        let mut out = BTreeMap::new();
        for part in parts {
            for &v in *part {
                out.insert(ProcessId(v), ProcessId(part[0]));
            }
        }
        out
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

    #[test]
    fn lk_examples() {
        let p5 = path(5);
        assert!(check_lk(&p5, &assign(&[&[1, 2, 3], &[4, 5]]), 2).verdict);
        let bad = check_lk(&p5, &assign(&[&[1], &[2, 3], &[4, 5]]), 2);
        assert!(!bad.verdict);
        assert_eq!(bad.mergeable_pairs, BTreeSet::from([(ProcessId(1), ProcessId(2))]));
        assert!(check_lk(&cycle(6), &assign(&[&[1, 2, 3], &[4, 5, 6]]), 2).verdict);
        assert!(check_lk(&cycle(6), &assign(&[&[1, 2], &[3, 4], &[5, 6]]), 2).verdict);
        let wide = check_lk(&p5, &assign(&[&[1, 2, 3, 4], &[5]]), 2);
        assert!(!wide.verdict);
        assert_eq!(wide.per_group_diameter[&ProcessId(1)], Hops::Finite(3));
    }

    #[test]
    fn near_and_mergeable() {
        let e = path(2);
        assert!(near(&e, &set(&[1]), &set(&[2]), 1).unwrap());
        assert!(mergeable(&e, &set(&[1]), &set(&[2]), 1).unwrap());
        let c6 = cycle(6);
        assert!(!near(&c6, &set(&[1, 2, 3]), &set(&[4, 5, 6]), 2).unwrap());
        assert!(!mergeable(&c6, &set(&[1, 2, 3]), &set(&[4, 5, 6]), 2).unwrap());
        assert_eq!(
            near(&c6, &set(&[1, 2]), &set(&[2, 3]), 2),
            Err(OracleError::Overlap(ProcessId(2)))
        );
    }

    #[test]
    fn exhaustive_examples() {
        assert_eq!(exhaustive_min_groups(&path(2), 1).unwrap(), 1);
        assert_eq!(exhaustive_min_groups(&path(5), 2).unwrap(), 2);
        let star = Graph::from_edges(&[1, 2, 3, 4, 5], &[(1, 2), (1, 3), (1, 4), (1, 5)]).unwrap();
        assert_eq!(exhaustive_min_groups(&star, 2).unwrap(), 1);
        assert_eq!(exhaustive_min_groups(&cycle(6), 2).unwrap(), 2);
        assert!(matches!(exhaustive_min_groups(&path(13), 2), Err(OracleError::TooLarge { .. })));
    }

    #[test]
    fn potential_arithmetic() {
        assert_eq!(Potential::from_counts(3, 3, 0).total, 9);
    }
}
