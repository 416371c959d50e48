//! Guarded-action execution under composite atomicity.
//!
//! An [`Algorithm`] maps a process's closed neighborhood to its
//! smallest-label enabled action and the state that action produces. The
//! [`Engine`] keeps one pending move per process, asks a [`Daemon`] which
//! enabled processes move, applies all selected moves against the same
//! pre-step snapshot, and re-evaluates only the processes whose closed
//! neighborhood changed.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, ProcessId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("daemon selected process {0}, which is not enabled")]
    NotEnabled(ProcessId),
    #[error("daemon selected unknown process {0}")]
    UnknownProcess(ProcessId),
    #[error("configuration covers {got} processes, graph has {want}")]
    ConfigSize { got: usize, want: usize },
    #[error("configuration is missing process {0}")]
    MissingProcess(ProcessId),
}

/// Read access to one process and its neighbors in a configuration.
///
/// This is the only way guards and statements see the network, so an
/// algorithm cannot read beyond distance one.
pub struct View<'a, S> {
    graph: &'a Graph,
    states: &'a [S],
    at: usize,
}

impl<'a, S> Clone for View<'a, S> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<'a, S> Copy for View<'a, S> {}

impl<'a, S> View<'a, S> {
    pub fn new(graph: &'a Graph, states: &'a [S], at: usize) -> Self {
        View { graph, states, at }
    }

    pub fn id(&self) -> ProcessId {
        self.graph.id_at(self.at)
    }

    pub fn state(&self) -> &'a S {
        &self.states[self.at]
    }

    /// Neighbors in ascending id order.
    pub fn neighbors(&self) -> impl Iterator<Item = (ProcessId, &'a S)> + 'a {
        let graph = self.graph;
        let states = self.states;
        graph
            .adj(self.at)
            .iter()
            .map(move |&j| (graph.id_at(j), &states[j]))
    }

    /// The process itself followed by its neighbors (the closed neighborhood).
    pub fn closed(&self) -> impl Iterator<Item = (ProcessId, &'a S)> + 'a {
        std::iter::once((self.id(), self.state())).chain(self.neighbors())
    }

    pub fn neighbor(&self, id: ProcessId) -> Option<&'a S> {
        let j = self.graph.index_of(id)?;
        self.graph
            .adj(self.at)
            .binary_search(&j)
            .ok()
            .map(|_| &self.states[j])
    }

    pub fn degree(&self) -> usize {
        self.graph.adj(self.at).len()
    }
}

/// A set of labeled guarded actions.
///
/// Labels are totally ordered; when several actions are enabled at a
/// process, the smallest label is the one that runs.
pub trait Algorithm {
    type State: Clone + PartialEq + fmt::Debug;
    type Label: Copy + Ord + fmt::Debug + fmt::Display;

    /// Labels of every enabled action at the viewed process, ascending.
    fn enabled_actions(&self, view: &View<'_, Self::State>) -> Vec<Self::Label>;

    /// The smallest-label enabled action and the state it writes, or `None`
    /// when the process is disabled.
    fn next_move(&self, view: &View<'_, Self::State>) -> Option<(Self::Label, Self::State)>;
}

/// One state per process, stored in the graph's ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration<S> {
    states: Vec<S>,
}

impl<S> Configuration<S> {
    pub fn from_vec(graph: &Graph, states: Vec<S>) -> Result<Self, RuntimeError> {
        if states.len() != graph.len() {
            return Err(RuntimeError::ConfigSize {
                got: states.len(),
                want: graph.len(),
            });
        }
        Ok(Configuration { states })
    }

    pub fn from_fn(graph: &Graph, mut f: impl FnMut(ProcessId) -> S) -> Self {
        Configuration {
            states: graph.ids().iter().map(|&v| f(v)).collect(),
        }
    }

    /// Builds a configuration from an id-keyed map that must cover the vertex
    /// set exactly.
    pub fn from_map(graph: &Graph, mut map: BTreeMap<ProcessId, S>) -> Result<Self, RuntimeError> {
        if map.len() != graph.len() {
            return Err(RuntimeError::ConfigSize {
                got: map.len(),
                want: graph.len(),
            });
        }
        let mut states = Vec::with_capacity(graph.len());
        for &v in graph.ids() {
            states.push(map.remove(&v).ok_or(RuntimeError::MissingProcess(v))?);
        }
        Ok(Configuration { states })
    }

    pub fn to_map(&self, graph: &Graph) -> BTreeMap<ProcessId, S>
    where
        S: Clone,
    {
        graph.ids().iter().copied().zip(self.states.iter().cloned()).collect()
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [S] {
        &mut self.states
    }

    pub fn get(&self, graph: &Graph, v: ProcessId) -> Option<&S> {
        graph.index_of(v).map(|i| &self.states[i])
    }

    pub fn get_mut(&mut self, graph: &Graph, v: ProcessId) -> Option<&mut S> {
        graph.index_of(v).map(move |i| &mut self.states[i])
    }

    pub fn view<'a>(&'a self, graph: &'a Graph, i: usize) -> View<'a, S> {
        View::new(graph, &self.states, i)
    }

    pub fn view_of<'a>(&'a self, graph: &'a Graph, v: ProcessId) -> Option<View<'a, S>> {
        graph.index_of(v).map(|i| self.view(graph, i))
    }
}

/// Labels of all enabled actions at `v`, ascending.
pub fn enabled_actions<A: Algorithm>(
    graph: &Graph,
    cfg: &Configuration<A::State>,
    v: ProcessId,
    alg: &A,
) -> Result<Vec<A::Label>, RuntimeError> {
    let view = cfg.view_of(graph, v).ok_or(RuntimeError::UnknownProcess(v))?;
    Ok(alg.enabled_actions(&view))
}

/// Next configuration and the labels fired, in selection order.
pub type Stepped<A> = (Configuration<<A as Algorithm>::State>, Vec<<A as Algorithm>::Label>);

/// Full trace, verdict and final configuration of a run.
pub type Finished<A> = (
    ExecutionTrace<<A as Algorithm>::State, <A as Algorithm>::Label>,
    Verdict,
    Configuration<<A as Algorithm>::State>,
);

/// One atomic step: every selected process runs its smallest-label enabled
/// action, all reading `cfg` as it was before the step.
pub fn step<A: Algorithm>(
    graph: &Graph,
    cfg: &Configuration<A::State>,
    selected: &[ProcessId],
    alg: &A,
) -> Result<Stepped<A>, RuntimeError> {
    let mut moves = Vec::with_capacity(selected.len());
    for &v in selected {
        let i = graph.index_of(v).ok_or(RuntimeError::UnknownProcess(v))?;
        let (label, next) = alg
            .next_move(&cfg.view(graph, i))
            .ok_or(RuntimeError::NotEnabled(v))?;
        moves.push((i, label, next));
    }
    let mut out = cfg.clone();
    let mut fired = Vec::with_capacity(moves.len());
    for (i, label, next) in moves {
        out.states[i] = next;
        fired.push(label);
    }
    Ok((out, fired))
}

/// Scheduling policy of the daemon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DaemonKind {
    /// Every enabled process moves at every step.
    Synchronous,
    /// Exactly one enabled process per step: uniformly random when seeded,
    /// otherwise the smallest id.
    Central {
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Each enabled process moves independently with probability `p`; at
    /// least one moves.
    Random { p: f64, seed: u64 },
    /// Step `i` selects exactly `steps[i]`; the run stops when the script
    /// runs out.
    Scripted { steps: Vec<Vec<ProcessId>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaemonPolicy {
    #[serde(flatten)]
    pub kind: DaemonKind,
    /// Force-select any process that stayed enabled without moving for `n`
    /// consecutive steps.
    #[serde(default = "default_aging")]
    pub aging: bool,
}

fn default_aging() -> bool {
    true
}

impl DaemonPolicy {
    pub fn synchronous() -> Self {
        DaemonPolicy {
            kind: DaemonKind::Synchronous,
            aging: false,
        }
    }

    pub fn central(seed: Option<u64>) -> Self {
        DaemonPolicy {
            kind: DaemonKind::Central { seed },
            aging: true,
        }
    }

    pub fn random(p: f64, seed: u64) -> Self {
        DaemonPolicy {
            kind: DaemonKind::Random { p, seed },
            aging: true,
        }
    }

    pub fn scripted(steps: Vec<Vec<ProcessId>>) -> Self {
        DaemonPolicy {
            kind: DaemonKind::Scripted { steps },
            aging: false,
        }
    }

    pub fn with_aging(mut self, aging: bool) -> Self {
        self.aging = aging;
        self
    }
}

/// Stateful scheduler built from a [`DaemonPolicy`].
#[derive(Debug, Clone)]
pub struct Daemon {
    policy: DaemonPolicy,
    rng: ChaCha8Rng,
    ages: Vec<u32>,
    cursor: usize,
}

impl Daemon {
    pub fn new(policy: DaemonPolicy, n: usize) -> Self {
        let seed = match &policy.kind {
            DaemonKind::Random { seed, .. } => *seed,
            DaemonKind::Central { seed: Some(s) } => *s,
            _ => 0,
        };
        Daemon {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ages: vec![0; n],
            cursor: 0,
        }
    }

    pub fn policy(&self) -> &DaemonPolicy {
        &self.policy
    }

    /// Consecutive steps each process has been enabled without moving.
    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    /// Picks the processes (by index) to move. `enabled` is ascending and
    /// nonempty. `None` means a scripted daemon has run out.
    pub fn select(
        &mut self,
        graph: &Graph,
        enabled: &[usize],
    ) -> Result<Option<Vec<usize>>, RuntimeError> {
        let n = graph.len() as u32;
        let forced: Vec<usize> = if self.policy.aging {
            enabled.iter().copied().filter(|&i| self.ages[i] >= n).collect()
        } else {
            Vec::new()
        };
        let pick = match &self.policy.kind {
            DaemonKind::Synchronous => enabled.to_vec(),
            DaemonKind::Central { seed } => {
                if let Some(&oldest) = forced.iter().max_by_key(|&&i| (self.ages[i], usize::MAX - i)) {
                    vec![oldest]
                } else if seed.is_some() {
                    vec![enabled[self.rng.gen_range(0..enabled.len())]]
                } else {
                    vec![enabled[0]]
                }
            }
            DaemonKind::Random { p, .. } => {
                let p = *p;
                let mut chosen: Vec<usize> = enabled
                    .iter()
                    .copied()
                    .filter(|_| self.rng.gen_bool(p.clamp(0.0, 1.0)))
                    .collect();
                if chosen.is_empty() {
                    chosen.push(enabled[self.rng.gen_range(0..enabled.len())]);
                }
                for f in forced {
                    if let Err(pos) = chosen.binary_search(&f) {
                        chosen.insert(pos, f);
                    }
                }
                chosen
            }
            DaemonKind::Scripted { steps } => {
                let Some(ids) = steps.get(self.cursor) else {
                    return Ok(None);
                };
                self.cursor += 1;
                let mut idx = Vec::with_capacity(ids.len());
                for &v in ids {
                    idx.push(graph.index_of(v).ok_or(RuntimeError::UnknownProcess(v))?);
                }
                idx.sort_unstable();
                idx.dedup();
                idx
            }
        };
        Ok(Some(pick))
    }

    /// Updates aging counters after a step.
    pub fn observe(&mut self, enabled_before: &[bool], selected: &[usize], enabled_after: &[bool]) {
        for i in 0..self.ages.len() {
            self.ages[i] = if enabled_before[i] && enabled_after[i] {
                self.ages[i] + 1
            } else {
                0
            };
        }
        for &i in selected {
            self.ages[i] = 0;
        }
    }
}

/// Incremental round counter.
///
/// A round ends at the first step by which every process enabled at the
/// round's first configuration has either moved or been neutralized
/// (enabled before a step and disabled after it).
#[derive(Debug, Clone)]
pub struct RoundTracker {
    pending: Vec<bool>,
    remaining: usize,
    rounds: usize,
}

impl RoundTracker {
    pub fn new(enabled: &[bool]) -> Self {
        RoundTracker {
            remaining: enabled.iter().filter(|&&e| e).count(),
            pending: enabled.to_vec(),
            rounds: 0,
        }
    }

    /// Feeds one step; returns true when it completes a round.
    pub fn step(&mut self, selected: &[usize], enabled_after: &[bool]) -> bool {
        if self.remaining == 0 {
            return false;
        }
        for &i in selected {
            if self.pending[i] {
                self.pending[i] = false;
                self.remaining -= 1;
            }
        }
        for (i, &on) in enabled_after.iter().enumerate() {
            // still pending means continuously enabled so far
            if self.pending[i] && !on {
                self.pending[i] = false;
                self.remaining -= 1;
            }
        }
        if self.remaining == 0 {
            self.rounds += 1;
            self.pending.copy_from_slice(enabled_after);
            self.remaining = enabled_after.iter().filter(|&&e| e).count();
            true
        } else {
            false
        }
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Re-seeds the current round after an external change to the
    /// configuration (fault injection); completed rounds are kept.
    pub fn restart(&mut self, enabled: &[bool]) {
        self.pending.copy_from_slice(enabled);
        self.remaining = enabled.iter().filter(|&&e| e).count();
    }
}

/// One step of an execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord<L> {
    pub index: usize,
    pub selected: Vec<ProcessId>,
    pub fired: Vec<L>,
    pub round_end: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Terminated,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace<S, L> {
    pub initial: Configuration<S>,
    pub steps: Vec<StepRecord<L>>,
    /// Indices (into `steps`) of the steps that close a round.
    pub round_boundaries: Vec<usize>,
}

impl<S, L> ExecutionTrace<S, L> {
    pub fn rounds(&self) -> usize {
        self.round_boundaries.len()
    }
}

/// Number of complete rounds in a trace.
pub fn rounds<S, L>(trace: &ExecutionTrace<S, L>) -> usize {
    trace.rounds()
}

/// Default step budget: `10^4 · n · (D + 1)`.
pub fn default_budget(graph: &Graph) -> u64 {
    10_000 * graph.len() as u64 * (graph.diameter() as u64 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub verdict: Verdict,
    pub steps: usize,
    pub rounds: usize,
}

/// Drives one execution.
pub struct Engine<'a, A: Algorithm> {
    graph: &'a Graph,
    alg: &'a A,
    config: Configuration<A::State>,
    moves: Vec<Option<(A::Label, A::State)>>,
    enabled: Vec<bool>,
    daemon: Daemon,
    rounds: RoundTracker,
    steps: usize,
}

impl<'a, A: Algorithm> Engine<'a, A> {
    pub fn new(
        graph: &'a Graph,
        alg: &'a A,
        config: Configuration<A::State>,
        daemon: DaemonPolicy,
    ) -> Self {
        let moves: Vec<_> = (0..graph.len())
            .map(|i| alg.next_move(&config.view(graph, i)))
            .collect();
        let enabled: Vec<bool> = moves.iter().map(Option::is_some).collect();
        Engine {
            graph,
            alg,
            rounds: RoundTracker::new(&enabled),
            daemon: Daemon::new(daemon, graph.len()),
            config,
            moves,
            enabled,
            steps: 0,
        }
    }

    pub fn graph(&self) -> &'a Graph {
        self.graph
    }

    pub fn algorithm(&self) -> &'a A {
        self.alg
    }

    pub fn config(&self) -> &Configuration<A::State> {
        &self.config
    }

    pub fn into_config(self) -> Configuration<A::State> {
        self.config
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rounds(&self) -> usize {
        self.rounds.rounds()
    }

    pub fn daemon(&self) -> &Daemon {
        &self.daemon
    }

    /// Enabled flags, indexed like the graph's ids.
    pub fn enabled(&self) -> &[bool] {
        &self.enabled
    }

    pub fn is_enabled(&self, v: ProcessId) -> bool {
        self.graph.index_of(v).is_some_and(|i| self.enabled[i])
    }

    /// The label the process would fire if selected now.
    pub fn pending_label(&self, v: ProcessId) -> Option<A::Label> {
        let i = self.graph.index_of(v)?;
        self.moves[i].as_ref().map(|(l, _)| *l)
    }

    pub fn is_final(&self) -> bool {
        !self.enabled.iter().any(|&e| e)
    }

    /// Replaces states through `edit` (fault injection) and re-evaluates
    /// every guard. The current round restarts from the edited configuration.
    pub fn perturb(&mut self, edit: impl FnOnce(&Graph, &mut Configuration<A::State>)) {
        edit(self.graph, &mut self.config);
        for i in 0..self.graph.len() {
            self.refresh(i);
        }
        self.rounds.restart(&self.enabled);
    }

    fn refresh(&mut self, i: usize) {
        self.moves[i] = self.alg.next_move(&self.config.view(self.graph, i));
        self.enabled[i] = self.moves[i].is_some();
    }

    /// Applies a step with an explicit selection (ascending indices).
    fn apply(&mut self, selected: Vec<usize>) -> Result<StepRecord<A::Label>, RuntimeError> {
        for &i in &selected {
            if !self.enabled[i] {
                return Err(RuntimeError::NotEnabled(self.graph.id_at(i)));
            }
        }
        let before = self.enabled.clone();
        let mut fired = Vec::with_capacity(selected.len());
        for &i in &selected {
            let (label, next) = self.moves[i].take().expect("enabled process has a move");
            self.config.states[i] = next;
            fired.push(label);
        }
        let mut dirty = vec![false; self.graph.len()];
        for &i in &selected {
            dirty[i] = true;
            for &j in self.graph.adj(i) {
                dirty[j] = true;
            }
        }
        for (i, d) in dirty.into_iter().enumerate() {
            if d {
                self.refresh(i);
            }
        }
        self.daemon.observe(&before, &selected, &self.enabled);
        let round_end = self.rounds.step(&selected, &self.enabled);
        let record = StepRecord {
            index: self.steps,
            selected: selected.iter().map(|&i| self.graph.id_at(i)).collect(),
            fired,
            round_end,
        };
        self.steps += 1;
        Ok(record)
    }

    /// Steps with the given processes, bypassing the daemon.
    pub fn step_with(&mut self, selected: &[ProcessId]) -> Result<StepRecord<A::Label>, RuntimeError> {
        let mut idx = Vec::with_capacity(selected.len());
        for &v in selected {
            idx.push(
                self.graph
                    .index_of(v)
                    .ok_or(RuntimeError::UnknownProcess(v))?,
            );
        }
        idx.sort_unstable();
        idx.dedup();
        self.apply(idx)
    }

    /// One daemon-driven step. `Ok(None)` when the configuration is final or
    /// a scripted daemon has run out.
    pub fn step(&mut self) -> Result<Option<StepRecord<A::Label>>, RuntimeError> {
        let enabled: Vec<usize> = (0..self.graph.len()).filter(|&i| self.enabled[i]).collect();
        if enabled.is_empty() {
            return Ok(None);
        }
        match self.daemon.select(self.graph, &enabled)? {
            None => Ok(None),
            Some(sel) => self.apply(sel).map(Some),
        }
    }

    /// Runs until the configuration is final or `max_steps` more steps have
    /// been taken, calling `observe` after every step.
    pub fn run_observed(
        &mut self,
        max_steps: u64,
        mut observe: impl FnMut(&Self, &StepRecord<A::Label>),
    ) -> Result<RunOutcome, RuntimeError> {
        let mut taken = 0u64;
        loop {
            if self.is_final() {
                return Ok(self.outcome(Verdict::Terminated));
            }
            if taken >= max_steps {
                return Ok(self.outcome(Verdict::BudgetExhausted));
            }
            match self.step()? {
                Some(record) => {
                    taken += 1;
                    observe(self, &record);
                }
                None => return Ok(self.outcome(Verdict::BudgetExhausted)),
            }
        }
    }

    pub fn run(&mut self, max_steps: u64) -> Result<RunOutcome, RuntimeError> {
        self.run_observed(max_steps, |_, _| {})
    }

    fn outcome(&self, verdict: Verdict) -> RunOutcome {
        RunOutcome {
            verdict,
            steps: self.steps,
            rounds: self.rounds.rounds(),
        }
    }
}

/// Runs `alg` from `cfg0` and records the full trace.
pub fn run<A: Algorithm>(
    graph: &Graph,
    alg: &A,
    cfg0: Configuration<A::State>,
    daemon: DaemonPolicy,
    max_steps: u64,
) -> Result<Finished<A>, RuntimeError> {
    let initial = cfg0.clone();
    let mut engine = Engine::new(graph, alg, cfg0, daemon);
    let mut steps = Vec::new();
    let mut boundaries = Vec::new();
    let outcome = engine.run_observed(max_steps, |_, rec| {
        if rec.round_end {
            boundaries.push(rec.index);
        }
        steps.push(rec.clone());
    })?;
    let trace = ExecutionTrace {
        initial,
        steps,
        round_boundaries: boundaries,
    };
    Ok((trace, outcome.verdict, engine.into_config()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `x != 0 -> x := 0`
    struct Zero;

    impl Algorithm for Zero {
        type State = i64;
        type Label = u8;
        fn enabled_actions(&self, view: &View<'_, i64>) -> Vec<u8> {
            if *view.state() != 0 {
                vec![1]
            } else {
                vec![]
            }
        }
        fn next_move(&self, view: &View<'_, i64>) -> Option<(u8, i64)> {
            (*view.state() != 0).then_some((1, 0))
        }
    }

    /// Action 1: `x < 10 -> x := max(neighbor x) + 1`; action 2 (always enabled while x < 100): `x := 100`.
    struct Climb;

    impl Algorithm for Climb {
        type State = i64;
        type Label = u8;
        fn enabled_actions(&self, view: &View<'_, i64>) -> Vec<u8> {
            let mut out = Vec::new();
            if *view.state() < 10 {
                out.push(1);
            }
            if *view.state() < 100 {
                out.push(2);
            }
            out
        }
        fn next_move(&self, view: &View<'_, i64>) -> Option<(u8, i64)> {
            if *view.state() < 10 {
                let m = view.neighbors().map(|(_, &x)| x).max().unwrap_or(0);
                Some((1, m + 1))
            } else if *view.state() < 100 {
                Some((2, 100))
            } else {
                None
            }
        }
    }

    fn edge() -> Graph {
        Graph::from_edges(&[1, 2], &[(1, 2)]).unwrap()
    }

    #[test]
    fn enabled_actions_listing() {
        let g = edge();
        let cfg = Configuration::from_vec(&g, vec![0, 5]).unwrap();
        assert!(enabled_actions(&g, &cfg, ProcessId(1), &Zero).unwrap().is_empty());
        assert_eq!(enabled_actions(&g, &cfg, ProcessId(2), &Zero).unwrap(), vec![1]);
        assert_eq!(enabled_actions(&g, &cfg, ProcessId(1), &Climb).unwrap(), vec![1, 2]);
    }

    #[test]
    fn empty_selection_is_identity() {
        let g = edge();
        let cfg = Configuration::from_vec(&g, vec![3, 5]).unwrap();
        let (out, fired) = step(&g, &cfg, &[], &Zero).unwrap();
        assert_eq!(out, cfg);
        assert!(fired.is_empty());
    }

    #[test]
    fn snapshot_semantics() {
        let g = edge();
        let cfg = Configuration::from_vec(&g, vec![0, 0]).unwrap();
        let (out, fired) = step(&g, &cfg, &[ProcessId(1), ProcessId(2)], &Climb).unwrap();
        assert_eq!(out.states(), &[1, 1]);
        // smallest label wins even though action 2 is enabled too
        assert_eq!(fired, vec![1, 1]);
    }

    #[test]
    fn selecting_disabled_process_is_an_error() {
        let g = edge();
        let cfg = Configuration::from_vec(&g, vec![0, 5]).unwrap();
        assert_eq!(
            step(&g, &cfg, &[ProcessId(1)], &Zero).unwrap_err(),
            RuntimeError::NotEnabled(ProcessId(1))
        );
    }

    #[test]
    fn final_start_gives_empty_trace() {
        let g = edge();
        let cfg = Configuration::from_vec(&g, vec![0, 0]).unwrap();
        let (trace, verdict, _) = run(&g, &Zero, cfg, DaemonPolicy::synchronous(), 10).unwrap();
        assert_eq!(verdict, Verdict::Terminated);
        assert!(trace.steps.is_empty());
        assert_eq!(rounds(&trace), 0);
    }

    #[test]
    fn single_move_under_synchronous_daemon() {
        let g = edge();
        let cfg = Configuration::from_vec(&g, vec![0, 5]).unwrap();
        let (trace, verdict, last) = run(&g, &Zero, cfg, DaemonPolicy::synchronous(), 10).unwrap();
        assert_eq!(verdict, Verdict::Terminated);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(last.states(), &[0, 0]);
    }

    #[test]
    fn synchronous_rounds_equal_steps() {
        let g = Graph::from_edges(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let cfg = Configuration::from_vec(&g, vec![0, 0, 0]).unwrap();
        let (trace, _, _) = run(&g, &Climb, cfg, DaemonPolicy::synchronous(), 1000).unwrap();
        assert!(!trace.steps.is_empty());
        assert_eq!(rounds(&trace), trace.steps.len());
    }

    #[test]
    fn central_daemon_round_spans_three_steps() {
        // three independent processes (a star's leaves only move) enabled at once
        let g = Graph::from_edges(&[1, 2, 3, 4], &[(1, 2), (1, 3), (1, 4)]).unwrap();
        let cfg = Configuration::from_vec(&g, vec![0, 7, 7, 7]).unwrap();
        let (trace, verdict, _) =
            run(&g, &Zero, cfg, DaemonPolicy::central(None), 10).unwrap();
        assert_eq!(verdict, Verdict::Terminated);
        assert_eq!(trace.steps.len(), 3);
        assert_eq!(trace.round_boundaries, vec![2]);
    }

    #[test]
    fn budget_exhaustion() {
        let g = edge();
        let cfg = Configuration::from_vec(&g, vec![0, 0]).unwrap();
        let mut engine = Engine::new(&g, &Climb, cfg, DaemonPolicy::central(None));
        let out = engine.run(3).unwrap();
        assert_eq!(out.verdict, Verdict::BudgetExhausted);
        assert_eq!(out.steps, 3);
    }

    #[test]
    fn neutralization_ends_round() {
        let mut t = RoundTracker::new(&[true, true]);
        // process 0 moves, process 1 stays enabled
        assert!(!t.step(&[0], &[false, true]));
        // process 1 becomes disabled without moving
        assert!(t.step(&[], &[false, false]));
        assert_eq!(t.rounds(), 1);
    }

    #[test]
    fn scripted_daemon_follows_script() {
        let g = edge();
        let cfg = Configuration::from_vec(&g, vec![4, 5]).unwrap();
        let script = vec![vec![ProcessId(2)], vec![ProcessId(1)]];
        let (trace, verdict, last) =
            run(&g, &Zero, cfg.clone(), DaemonPolicy::scripted(script), 10).unwrap();
        assert_eq!(verdict, Verdict::Terminated);
        assert_eq!(trace.steps[0].selected, vec![ProcessId(2)]);
        assert_eq!(last.states(), &[0, 0]);

        let bad = vec![vec![ProcessId(2)], vec![ProcessId(2)]];
        let err = run(&g, &Zero, cfg.clone(), DaemonPolicy::scripted(bad), 10).unwrap_err();
        assert_eq!(err, RuntimeError::NotEnabled(ProcessId(2)));

        let short = vec![vec![ProcessId(2)]];
        let (_, verdict, _) = run(&g, &Zero, cfg, DaemonPolicy::scripted(short), 10).unwrap();
        assert_eq!(verdict, Verdict::BudgetExhausted);
    }

    #[test]
    fn aging_forces_starved_process() {
        // min-id central daemon alone would serve process 1 forever
        let g = edge();
        let cfg = Configuration::from_vec(&g, vec![0, 0]).unwrap();
        let mut engine = Engine::new(&g, &Climb, cfg.clone(), DaemonPolicy::central(None));
        let mut served_two = false;
        engine
            .run_observed(6, |_, rec| served_two |= rec.selected == vec![ProcessId(2)])
            .unwrap();
        assert!(served_two);

        let mut engine = Engine::new(
            &g,
            &Climb,
            cfg,
            DaemonPolicy::central(None).with_aging(false),
        );
        let mut served_two = false;
        engine
            .run_observed(6, |_, rec| served_two |= rec.selected == vec![ProcessId(2)])
            .unwrap();
        assert!(!served_two);
    }

    #[test]
    fn daemon_policy_json() {
        let p: DaemonPolicy =
            serde_json::from_str(r#"{"kind":"random","p":0.5,"seed":3}"#).unwrap();
        assert_eq!(p, DaemonPolicy::random(0.5, 3));
        let c: DaemonPolicy = serde_json::from_str(r#"{"kind":"central"}"#).unwrap();
        assert_eq!(c.kind, DaemonKind::Central { seed: None });
    }
}
