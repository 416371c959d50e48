//! The loop combinator.
//!
//! `Loop` runs a base algorithm `A` to a fixed point, copies its outputs to
//! its inputs, and repeats until copying changes nothing. A five-color wave
//! over the BFS tree separates consecutive executions of `A`; when the error
//! predicate fires anywhere, the network switches to the initializer `P`,
//! runs it to a fixed point, and then resumes `A`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bfs::{self, BfsLabel, BfsVars};
use crate::graph::{Graph, ProcessId};
use crate::runtime::{Algorithm, Configuration, View};

/// Wave color, always in `0..=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Color(u8);

impl Color {
    pub const ZERO: Color = Color(0);

    pub fn new(c: u8) -> Option<Color> {
        (c < 5).then_some(Color(c))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// `(c + 1) mod 5`
    pub fn succ(self) -> Color {
        Color((self.0 + 1) % 5)
    }
}

impl TryFrom<u8> for Color {
    type Error = String;
    fn try_from(c: u8) -> Result<Self, String> {
        Color::new(c).ok_or_else(|| format!("color {c} out of range 0..=4"))
    }
}

impl From<Color> for u8 {
    fn from(c: Color) -> u8 {
        c.0
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    A,
    P,
}

/// Per-process state of a composed algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState<V> {
    #[serde(flatten)]
    pub bfs: BfsVars,
    pub cl: Color,
    pub mode: Mode,
    pub rst: bool,
    #[serde(flatten)]
    pub base: V,
}

impl<V> AsRef<BfsVars> for LoopState<V> {
    fn as_ref(&self) -> &BfsVars {
        &self.bfs
    }
}

impl<V> LoopState<V> {
    pub fn fresh(id: ProcessId, base: V) -> Self {
        LoopState {
            bfs: BfsVars::rooted(id),
            cl: Color::ZERO,
            mode: Mode::A,
            rst: false,
            base,
        }
    }
}

/// Variable names declared by a base algorithm, checked by [`Loop::compose`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    /// Each output of `A` with the name of its copying input.
    pub a_outputs: Vec<(String, String)>,
    pub p_outputs: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("variable `{0}` is an output of both A and P")]
    SharedOutput(String),
    #[error("output `{0}` has no copying variable")]
    MissingCopy(String),
    #[error("variable `{0}` is declared more than once")]
    Duplicate(String),
}

impl Binding {
    pub fn validate(&self) -> Result<(), ComposeError> {
        let mut seen = BTreeSet::new();
        for (x, in_x) in &self.a_outputs {
            if in_x.is_empty() {
                return Err(ComposeError::MissingCopy(x.clone()));
            }
            for name in [x, in_x] {
                if !seen.insert(name.as_str()) {
                    return Err(ComposeError::Duplicate(name.clone()));
                }
            }
        }
        let outputs: BTreeSet<&str> = self.a_outputs.iter().map(|(x, _)| x.as_str()).collect();
        let mut p_seen = BTreeSet::new();
        for y in &self.p_outputs {
            if outputs.contains(y.as_str()) {
                return Err(ComposeError::SharedOutput(y.clone()));
            }
            if !p_seen.insert(y.as_str()) {
                return Err(ComposeError::Duplicate(y.clone()));
            }
        }
        Ok(())
    }
}

/// A base algorithm `A` together with its error predicate and initializer.
///
/// Both `A` and `P` see the full composed state of their closed
/// neighborhood, including the BFS tree.
pub trait LoopBase {
    type Vars: Clone + PartialEq + fmt::Debug;
    type ALabel: Copy + Ord + fmt::Debug + fmt::Display;
    type PLabel: Copy + Ord + fmt::Debug + fmt::Display;

    fn binding(&self) -> Binding;

    fn a_enabled(&self, view: &View<'_, LoopState<Self::Vars>>) -> Vec<Self::ALabel>;
    fn a_move(&self, view: &View<'_, LoopState<Self::Vars>>) -> Option<(Self::ALabel, Self::Vars)>;

    fn p_enabled(&self, view: &View<'_, LoopState<Self::Vars>>) -> Vec<Self::PLabel>;
    fn p_move(&self, view: &View<'_, LoopState<Self::Vars>>) -> Option<(Self::PLabel, Self::Vars)>;

    fn error(&self, view: &View<'_, LoopState<Self::Vars>>) -> bool;

    /// True when every copying input already equals its output.
    fn outputs_copied(&self, vars: &Self::Vars) -> bool;
    fn copy_outputs(&self, vars: &mut Self::Vars);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LoopLabel<AL, PL> {
    Bfs(BfsLabel),
    ColorReset,
    ColorInit,
    ColorInit34,
    Error,
    AFindsP,
    AEnabled(AL),
    PEnabled(PL),
    Illegal,
    PropagateReset,
    DelReset,
    Down,
    To2,
    To4A,
    To4P,
    To0,
}

impl<AL, PL> LoopLabel<AL, PL> {
    /// Position in the action table, 1 to 16.
    pub fn number(&self) -> u8 {
        match self {
            LoopLabel::Bfs(_) => 1,
            LoopLabel::ColorReset => 2,
            LoopLabel::ColorInit => 3,
            LoopLabel::ColorInit34 => 4,
            LoopLabel::Error => 5,
            LoopLabel::AFindsP => 6,
            LoopLabel::AEnabled(_) => 7,
            LoopLabel::PEnabled(_) => 8,
            LoopLabel::Illegal => 9,
            LoopLabel::PropagateReset => 10,
            LoopLabel::DelReset => 11,
            LoopLabel::Down => 12,
            LoopLabel::To2 => 13,
            LoopLabel::To4A => 14,
            LoopLabel::To4P => 15,
            LoopLabel::To0 => 16,
        }
    }
}

impl<AL: fmt::Display, PL: fmt::Display> fmt::Display for LoopLabel<AL, PL> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.number())?;
        match self {
            LoopLabel::Bfs(l) => write!(f, ":{l}"),
            LoopLabel::AEnabled(l) => write!(f, ":{l}"),
            LoopLabel::PEnabled(l) => write!(f, ":{l}"),
            _ => Ok(()),
        }
    }
}

const ILLEGAL_PAIRS: [(u8, u8); 10] = [
    (1, 3),
    (1, 4),
    (2, 0),
    (2, 1),
    (2, 3),
    (2, 4),
    (3, 0),
    (3, 1),
    (4, 1),
    (4, 2),
];

/// Parent/child color combinations that can never occur in a clean wave.
pub fn illegal_pair(parent: Color, child: Color) -> bool {
    ILLEGAL_PAIRS.contains(&(parent.get(), child.get()))
}

fn parent_state<'a, V>(view: &View<'a, LoopState<V>>) -> Option<&'a LoopState<V>> {
    bfs::par(view).and_then(|p| view.neighbor(p))
}

/// Parent is one color ahead and every child has caught up.
pub fn down_ok<V>(view: &View<'_, LoopState<V>>) -> bool {
    let cl = view.state().cl.get();
    parent_state(view).is_none_or(|p| p.cl.get() == cl + 1)
        && bfs::chi(view).all(|(_, c)| c.cl.get() == cl)
}

/// Parent has the same color and every child is one color ahead.
pub fn up_ok<V>(view: &View<'_, LoopState<V>>) -> bool {
    let cl = view.state().cl;
    parent_state(view).is_none_or(|p| p.cl == cl) && bfs::chi(view).all(|(_, c)| c.cl == cl.succ())
}

/// The composed algorithm.
#[derive(Debug, Clone)]
pub struct Loop<B> {
    base: B,
    n: usize,
}

type Move<B> = (
    LoopLabel<<B as LoopBase>::ALabel, <B as LoopBase>::PLabel>,
    LoopState<<B as LoopBase>::Vars>,
);

impl<B: LoopBase> Loop<B> {
    /// Composes `base` for a network of `n` processes.
    pub fn compose(base: B, n: usize) -> Result<Self, ComposeError> {
        base.binding().validate()?;
        Ok(Loop { base, n })
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Evaluates the action table in order. With `first_only`, stops at the
    /// first enabled action.
    fn evaluate(&self, view: &View<'_, LoopState<B::Vars>>, first_only: bool) -> Vec<Move<B>> {
        let mut out: Vec<Move<B>> = Vec::new();
        let me = view.state();
        let cl = me.cl.get();
        macro_rules! offer {
            ($label:expr, $state:expr) => {{
                out.push(($label, $state));
                if first_only {
                    return out;
                }
            }};
        }
        let with = |f: &dyn Fn(&mut LoopState<B::Vars>)| {
            let mut s = me.clone();
            f(&mut s);
            s
        };

        if let Some((l, b)) = bfs::bfs_move(view, self.n) {
            offer!(LoopLabel::Bfs(l), LoopState { bfs: b, ..me.clone() });
        }
        if !matches!(cl, 0 | 3 | 4) && me.rst {
            offer!(LoopLabel::ColorReset, with(&|s| s.cl = Color::ZERO));
        }
        let parent = parent_state(view);
        let parent_zero = parent.is_some_and(|p| p.cl == Color::ZERO);
        if matches!(cl, 1 | 2) && parent_zero {
            offer!(LoopLabel::ColorInit, with(&|s| s.cl = Color::ZERO));
        }
        if matches!(cl, 3 | 4) && parent_zero {
            offer!(
                LoopLabel::ColorInit34,
                with(&|s| {
                    s.cl = Color::ZERO;
                    s.rst = true;
                })
            );
        }
        let no_four = view.closed().all(|(_, u)| u.cl.get() != 4);
        let to_p = |s: &mut LoopState<B::Vars>| {
            s.mode = Mode::P;
            s.rst = true;
        };
        if me.mode == Mode::A && no_four && self.base.error(view) {
            offer!(LoopLabel::Error, with(&to_p));
        }
        if me.mode == Mode::A && cl != 4 && view.neighbors().any(|(_, u)| u.mode == Mode::P) {
            offer!(LoopLabel::AFindsP, with(&to_p));
        }
        if no_four {
            if view.closed().all(|(_, u)| u.mode == Mode::A) {
                if first_only {
                    if let Some((l, vars)) = self.base.a_move(view) {
                        offer!(LoopLabel::AEnabled(l), LoopState { base: vars, rst: true, ..me.clone() });
                    }
                } else if let Some(&l) = self.base.a_enabled(view).first() {
                    let (_, vars) = self.base.a_move(view).expect("A is enabled");
                    offer!(LoopLabel::AEnabled(l), LoopState { base: vars, rst: true, ..me.clone() });
                }
            }
            if view.closed().all(|(_, u)| u.mode == Mode::P) {
                if let Some((l, vars)) = self.base.p_move(view) {
                    offer!(LoopLabel::PEnabled(l), LoopState { base: vars, rst: true, ..me.clone() });
                }
            }
        }
        if bfs::chi(view).any(|(_, u)| illegal_pair(me.cl, u.cl)) {
            offer!(
                LoopLabel::Illegal,
                with(&|s| {
                    s.cl = Color::ZERO;
                    s.rst = true;
                })
            );
        }
        if !me.rst && bfs::chi(view).any(|(_, u)| u.rst) {
            offer!(LoopLabel::PropagateReset, with(&|s| s.rst = true));
        }
        if me.rst && parent.is_none_or(|p| p.rst) && bfs::chi(view).all(|(_, u)| !u.rst) {
            offer!(LoopLabel::DelReset, with(&|s| s.rst = false));
        }
        if matches!(cl, 0 | 2) && !me.rst && down_ok(view) {
            offer!(LoopLabel::Down, with(&|s| s.cl = s.cl.succ()));
        }
        if cl == 1 && up_ok(view) {
            offer!(LoopLabel::To2, with(&|s| s.cl = Color(2)));
        }
        if cl == 3 && bfs::chi(view).all(|(_, u)| u.cl.get() != 2) {
            if me.mode == Mode::A
                && (!self.base.outputs_copied(&me.base)
                    || view.neighbors().any(|(_, u)| u.cl.get() == 4))
            {
                offer!(
                    LoopLabel::To4A,
                    with(&|s| {
                        s.cl = Color(4);
                        self.base.copy_outputs(&mut s.base);
                    })
                );
            }
            if me.mode == Mode::P {
                offer!(
                    LoopLabel::To4P,
                    with(&|s| {
                        s.cl = Color(4);
                        s.mode = Mode::A;
                    })
                );
            }
        }
        if cl == 4 && up_ok(view) && view.neighbors().all(|(_, u)| matches!(u.cl.get(), 0 | 4)) {
            offer!(LoopLabel::To0, with(&|s| s.cl = Color::ZERO));
        }
        out
    }
}

impl<B: LoopBase> Algorithm for Loop<B> {
    type State = LoopState<B::Vars>;
    type Label = LoopLabel<B::ALabel, B::PLabel>;

    fn enabled_actions(&self, view: &View<'_, Self::State>) -> Vec<Self::Label> {
        self.evaluate(view, false).into_iter().map(|(l, _)| l).collect()
    }

    fn next_move(&self, view: &View<'_, Self::State>) -> Option<(Self::Label, Self::State)> {
        self.evaluate(view, true).into_iter().next()
    }
}

/// Runs only the base algorithm `A` (no wave, no BFS), for measuring a
/// single execution of `A` in isolation.
#[derive(Debug, Clone)]
pub struct BaseOnly<'b, B>(pub &'b B);

impl<B: LoopBase> Algorithm for BaseOnly<'_, B> {
    type State = LoopState<B::Vars>;
    type Label = B::ALabel;

    fn enabled_actions(&self, view: &View<'_, Self::State>) -> Vec<B::ALabel> {
        self.0.a_enabled(view)
    }

    fn next_move(&self, view: &View<'_, Self::State>) -> Option<(B::ALabel, Self::State)> {
        self.0
            .a_move(view)
            .map(|(l, base)| (l, LoopState { base, ..view.state().clone() }))
    }
}

/// Runs only the initializer `P`.
#[derive(Debug, Clone)]
pub struct InitOnly<'b, B>(pub &'b B);

impl<B: LoopBase> Algorithm for InitOnly<'_, B> {
    type State = LoopState<B::Vars>;
    type Label = B::PLabel;

    fn enabled_actions(&self, view: &View<'_, Self::State>) -> Vec<B::PLabel> {
        self.0.p_enabled(view)
    }

    fn next_move(&self, view: &View<'_, Self::State>) -> Option<(B::PLabel, Self::State)> {
        self.0
            .p_move(view)
            .map(|(l, base)| (l, LoopState { base, ..view.state().clone() }))
    }
}

/// Overwrites every copying input with its output at every process.
pub fn copy_shift<B: LoopBase>(base: &B, cfg: &Configuration<LoopState<B::Vars>>) -> Configuration<LoopState<B::Vars>> {
    let mut out = cfg.clone();
    for s in out.states_mut() {
        base.copy_outputs(&mut s.base);
    }
    out
}

/// No error anywhere, outputs already copied, and `A` disabled everywhere.
pub fn check_cgoal<B: LoopBase>(graph: &Graph, base: &B, cfg: &Configuration<LoopState<B::Vars>>) -> bool {
    (0..graph.len()).all(|i| {
        let view = cfg.view(graph, i);
        base.outputs_copied(&view.state().base) && !base.error(&view) && base.a_move(&view).is_none()
    })
}

/// [`check_cgoal`] plus every process resting in mode A with color 3 and no
/// reset flag.
pub fn check_cfin<B: LoopBase>(graph: &Graph, base: &B, cfg: &Configuration<LoopState<B::Vars>>) -> bool {
    cfg.states()
        .iter()
        .all(|s| s.mode == Mode::A && s.cl.get() == 3 && !s.rst)
        && check_cgoal(graph, base, cfg)
}
