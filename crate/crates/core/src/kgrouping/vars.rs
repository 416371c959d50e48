//! Per-process variables of the k-grouping layer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::ProcessId;

/// Values held for one key `u` of a process's domain.
///
/// Distances live in `[0, 2k]`; anything else is stored as `None`.
/// Boolean arrays have no undefined value, and a missing key reads as false.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Slot {
    pub dist: Option<u32>,
    pub group_d: Option<u32>,
    pub merge_d: Option<u32>,
    pub stamp_d: Option<u32>,
    pub border: Option<ProcessId>,
    pub far: Option<ProcessId>,
    pub target: Option<ProcessId>,
    pub stamp1: Option<ProcessId>,
    pub stamp2: Option<ProcessId>,
    pub groups: Option<ProcessId>,
    pub merging: bool,
    pub stamp_on: bool,
    pub prior: bool,
    pub in_groups: Option<ProcessId>,
    pub in_group_d: Option<u32>,
    pub in_stamp_on: bool,
    pub in_prior: bool,
    pub in_stamp1: Option<ProcessId>,
    pub in_stamp2: Option<ProcessId>,
    pub in_stamp_d: Option<u32>,
}

impl Slot {
    pub fn outputs_copied(&self) -> bool {
        self.in_groups == self.groups
            && self.in_group_d == self.group_d
            && self.in_stamp_on == self.stamp_on
            && self.in_prior == self.prior
            && self.in_stamp1 == self.stamp1
            && self.in_stamp2 == self.stamp2
            && self.in_stamp_d == self.stamp_d
    }

    pub fn copy_outputs(&mut self) {
        self.in_groups = self.groups;
        self.in_group_d = self.group_d;
        self.in_stamp_on = self.stamp_on;
        self.in_prior = self.prior;
        self.in_stamp1 = self.stamp1;
        self.in_stamp2 = self.stamp2;
        self.in_stamp_d = self.stamp_d;
    }
}

/// The domain is the key set of `slots`, so arrays can never hold keys
/// outside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupVars {
    pub height: u32,
    pub init_group: ProcessId,
    pub group: ProcessId,
    pub in_group: ProcessId,
    pub slots: BTreeMap<ProcessId, Slot>,
}

impl GroupVars {
    /// Empty domain, every group variable pointing at `id`.
    pub fn zeroed(id: ProcessId) -> Self {
        GroupVars {
            height: 0,
            init_group: id,
            group: id,
            in_group: id,
            slots: BTreeMap::new(),
        }
    }

    pub fn domain(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.slots.keys().copied()
    }

    pub fn in_domain(&self, u: ProcessId) -> bool {
        self.slots.contains_key(&u)
    }

    pub fn slot(&self, u: ProcessId) -> Option<&Slot> {
        self.slots.get(&u)
    }

    /// Reads one array entry; keys outside the domain read as undefined.
    pub fn get<T>(&self, u: ProcessId, field: impl Fn(&Slot) -> Option<T>) -> Option<T> {
        self.slots.get(&u).and_then(field)
    }

    pub fn flag(&self, u: ProcessId, field: impl Fn(&Slot) -> bool) -> bool {
        self.slots.get(&u).is_some_and(field)
    }

    /// `g_v(u)`: keys whose copied group is `u`.
    pub fn members_of(&self, u: ProcessId) -> impl Iterator<Item = ProcessId> + '_ {
        self.slots
            .iter()
            .filter(move |(_, s)| s.in_groups == Some(u))
            .map(|(&w, _)| w)
    }

    pub fn outputs_copied(&self) -> bool {
        self.in_group == self.group && self.slots.values().all(Slot::outputs_copied)
    }

    pub fn copy_outputs(&mut self) {
        self.in_group = self.group;
        self.slots.values_mut().for_each(Slot::copy_outputs);
    }

    /// Number of stored array keys, for memory accounting.
    pub fn stored_keys(&self) -> usize {
        self.slots.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copy_round_trip() {
        let mut g = GroupVars::zeroed(ProcessId(4));
        g.group = ProcessId(2);
        g.slots.insert(
            ProcessId(2),
            Slot {
                groups: Some(ProcessId(2)),
                stamp_d: Some(3),
                prior: true,
                ..Slot::default()
            },
        );
        assert!(!g.outputs_copied());
        g.copy_outputs();
        assert!(g.outputs_copied());
        assert_eq!(g.in_group, ProcessId(2));
        assert_eq!(g.members_of(ProcessId(2)).collect::<Vec<_>>(), vec![ProcessId(2)]);
        assert!(g.flag(ProcessId(2), |s| s.in_prior));
        assert!(!g.flag(ProcessId(9), |s| s.in_prior));
    }

    #[test]
    fn json_round_trip() {
        let mut g = GroupVars::zeroed(ProcessId(1));
        g.slots.insert(ProcessId(7), Slot { dist: Some(2), ..Slot::default() });
        let text = serde_json::to_string(&g).unwrap();
        let back: GroupVars = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }
}
