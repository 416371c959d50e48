//! Monitored k-grouping runs: run descriptors, fault injection, per-wave
//! checks, JSONL traces and summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::bfs;
use crate::compose::{copy_shift, check_cfin, BaseOnly, Color, LoopBase, LoopLabel, Mode};
use crate::generate::{false_ids, random_config};
use crate::graph::{Graph, GraphError, ProcessId};
use crate::kgrouping::{zeroed_config, GState, KGroupError, KGrouping, KLabel, KLoop, Slot};
use crate::oracle::{check_lk_config, potential, unsound_stamps, GroupingReport, Potential};
use crate::runtime::{default_budget, Configuration, DaemonPolicy, Engine, RunOutcome, RuntimeError, StepRecord, Verdict};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad run descriptor: {0}")]
    Descriptor(String),
    #[error("bad corruption spec: {0}")]
    Corruption(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    KGroup(#[from] KGroupError),
    #[error("trace output failed: {0}")]
    Trace(io::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// How the initial configuration is produced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    #[default]
    Zeroed,
    /// Uniformly random values, with `false_ids` identifiers that match no
    /// process mixed into the id pool.
    Random {
        seed: u64,
        #[serde(default = "default_false_ids")]
        false_ids: usize,
    },
    /// JSON object mapping each process id to its full state.
    File { path: PathBuf },
}

fn default_false_ids() -> usize {
    2
}

fn default_algorithm() -> String {
    "k-grouping".into()
}

/// A single experiment, as read from a JSON file. Relative paths resolve
/// against the descriptor's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub graph: PathBuf,
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
    pub k: u32,
    pub daemon: DaemonPolicy,
    /// Defaults to [`default_budget`].
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default)]
    pub init: InitMode,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<PathBuf>,
}

impl RunDescriptor {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let desc: RunDescriptor =
            serde_json::from_str(&text).map_err(|e| ExperimentError::Descriptor(e.to_string()))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((desc, dir))
    }

    /// Loads the graph and builds the initial configuration.
    pub fn instance(&self, dir: &Path) -> Result<Instance, ExperimentError> {
        if self.algorithm != "k-grouping" {
            return Err(ExperimentError::Descriptor(format!("unknown algorithm {:?}", self.algorithm)));
        }
        let base = KGrouping::new(self.k)?;
        let graph_path = dir.join(&self.graph);
        let graph = Graph::load(&graph_path)?;
        let init = match &self.init {
            InitMode::Zeroed => zeroed_config(&graph),
            InitMode::Random { seed, false_ids: f } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                random_config(&graph, self.k, &false_ids(&graph, *f), &mut rng)
            }
            InitMode::File { path } => {
                let p = dir.join(path);
                let text = std::fs::read_to_string(&p).map_err(io_err(&p))?;
                let map: BTreeMap<ProcessId, GState> =
                    serde_json::from_str(&text).map_err(|e| ExperimentError::Descriptor(e.to_string()))?;
                Configuration::from_map(&graph, map)?
            }
        };
        let max_steps = self.max_steps.unwrap_or_else(|| default_budget(&graph));
        if max_steps == 0 {
            return Err(ExperimentError::Descriptor("max_steps must be positive".into()));
        }
        Ok(Instance {
            graph,
            base,
            daemon: self.daemon.clone(),
            max_steps,
            init,
        })
    }
}

/// Everything needed to execute one run.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: Graph,
    pub base: KGrouping,
    pub daemon: DaemonPolicy,
    pub max_steps: u64,
    pub init: Configuration<GState>,
}

impl Instance {
    pub fn new(graph: Graph, k: u32, daemon: DaemonPolicy, init: Configuration<GState>) -> Result<Self, ExperimentError> {
        let max_steps = default_budget(&graph);
        Ok(Instance {
            base: KGrouping::new(k)?,
            graph,
            daemon,
            max_steps,
            init,
        })
    }

    pub fn zeroed(graph: Graph, k: u32, daemon: DaemonPolicy) -> Result<Self, ExperimentError> {
        let init = zeroed_config(&graph);
        Instance::new(graph, k, daemon, init)
    }

    pub fn k(&self) -> u32 {
        self.base.k()
    }
}

/// Variable classes that fault injection can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarClass {
    Color,
    Mode,
    Rst,
    /// Boolean arrays of the merge pass.
    Flags,
    /// Every copying input, including `in_group`.
    Copy,
    InGroup,
    Bfs,
    /// Non-copying outputs of both modules.
    Outputs,
}

impl FromStr for VarClass {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "color" | "cl" => VarClass::Color,
            "mode" => VarClass::Mode,
            "rst" => VarClass::Rst,
            "flags" => VarClass::Flags,
            "copy" => VarClass::Copy,
            "in_group" | "in-group" => VarClass::InGroup,
            "bfs" => VarClass::Bfs,
            "outputs" => VarClass::Outputs,
            other => return Err(ExperimentError::Corruption(format!("unknown variable class {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptCount {
    All,
    Exactly(usize),
    /// A percentage of all variables in the configuration, whatever their
    /// class.
    Percent(u8),
}

/// When, what and how much to corrupt.
///
/// Text form: `vars=color,mode,rst;count=10;seed=3;at=50`, where `count` may
/// also be `all` or a percentage such as `25%`. `at` is the step after which the corruption happens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub vars: Vec<VarClass>,
    pub count: CorruptCount,
    pub seed: u64,
    pub at: u64,
}

impl CorruptionSpec {
    /// Touches nothing; such a run is identical to an uncorrupted one.
    pub fn is_noop(&self) -> bool {
        self.vars.is_empty() || matches!(self.count, CorruptCount::Exactly(0) | CorruptCount::Percent(0))
    }
}

impl FromStr for CorruptionSpec {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |m: String| ExperimentError::Corruption(m);
        let mut vars = None;
        let mut count = CorruptCount::All;
        let mut seed = 0;
        let mut at = 0;
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
            match key.trim() {
                "vars" => {
                    let list: Result<Vec<VarClass>, _> = value.split(',').map(|v| v.trim().parse()).collect();
                    vars = Some(list?);
                }
                "count" => {
                    count = if value == "all" {
                        CorruptCount::All
                    } else if let Some(p) = value.strip_suffix('%') {
                        match p.parse() {
                            Ok(p) if p <= 100 => CorruptCount::Percent(p),
                            _ => return Err(bad(format!("bad percentage {value:?}"))),
                        }
                    } else {
                        CorruptCount::Exactly(value.parse().map_err(|_| bad(format!("bad count {value:?}")))?)
                    }
                }
                "seed" => seed = value.parse().map_err(|_| bad(format!("bad seed {value:?}")))?,
                "at" => at = value.parse().map_err(|_| bad(format!("bad step {value:?}")))?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let vars = vars.ok_or_else(|| bad("missing vars".into()))?;
        Ok(CorruptionSpec { vars, count, seed, at })
    }
}

impl fmt::Display for CorruptionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars: Vec<String> = self
            .vars
            .iter()
            .map(|v| serde_json::to_value(v).expect("unit variant").as_str().unwrap_or_default().to_owned())
            .collect();
        let count = match self.count {
            CorruptCount::All => "all".to_string(),
            CorruptCount::Exactly(c) => c.to_string(),
            CorruptCount::Percent(p) => format!("{p}%"),
        };
        write!(f, "vars={};count={count};seed={};at={}", vars.join(","), self.seed, self.at)
    }
}

/// One corruptible variable of one process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Color,
    Mode,
    Rst,
    Root,
    Lvl,
    Parent,
    Height,
    InitGroup,
    Group,
    InGroup,
    Slot(ProcessId, usize),
}

const SLOT_FIELDS: [VarClass; 20] = [
    VarClass::Outputs, // dist
    VarClass::Outputs, // group_d
    VarClass::Outputs, // merge_d
    VarClass::Outputs, // stamp_d
    VarClass::Outputs, // border
    VarClass::Outputs, // far
    VarClass::Outputs, // target
    VarClass::Outputs, // stamp1
    VarClass::Outputs, // stamp2
    VarClass::Outputs, // groups
    VarClass::Flags,   // merging
    VarClass::Flags,   // stamp_on
    VarClass::Flags,   // prior
    VarClass::Copy,    // in_groups
    VarClass::Copy,    // in_group_d
    VarClass::Copy,    // in_stamp_on
    VarClass::Copy,    // in_prior
    VarClass::Copy,    // in_stamp1
    VarClass::Copy,    // in_stamp2
    VarClass::Copy,    // in_stamp_d
];

fn cell_class(c: Cell) -> VarClass {
    match c {
        Cell::Color => VarClass::Color,
        Cell::Mode => VarClass::Mode,
        Cell::Rst => VarClass::Rst,
        Cell::Root | Cell::Lvl | Cell::Parent => VarClass::Bfs,
        Cell::Height | Cell::InitGroup | Cell::Group => VarClass::Outputs,
        Cell::InGroup => VarClass::InGroup,
        Cell::Slot(_, f) => SLOT_FIELDS[f],
    }
}

fn selects(wanted: &[VarClass], c: Cell) -> bool {
    let class = cell_class(c);
    wanted.contains(&class) || (class == VarClass::InGroup && wanted.contains(&VarClass::Copy))
}

fn cells_of(s: &GState) -> impl Iterator<Item = Cell> + '_ {
    let fixed = [
        Cell::Color,
        Cell::Mode,
        Cell::Rst,
        Cell::Root,
        Cell::Lvl,
        Cell::Parent,
        Cell::Height,
        Cell::InitGroup,
        Cell::Group,
        Cell::InGroup,
    ];
    fixed
        .into_iter()
        .chain(s.base.slots.keys().flat_map(|&u| (0..SLOT_FIELDS.len()).map(move |f| Cell::Slot(u, f))))
}

/// Total number of variables held by all processes.
pub fn variable_count(cfg: &Configuration<GState>) -> usize {
    cfg.states().iter().map(|s| cells_of(s).count()).sum()
}

fn scramble(s: &mut GState, cell: Cell, ids: &[ProcessId], k: u32, n: u32, rng: &mut ChaCha8Rng) {
    let id = |rng: &mut ChaCha8Rng| ids[rng.gen_range(0..ids.len())];
    let opt_id = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.2) { None } else { Some(id(rng)) };
    let dist = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.2) { None } else { Some(rng.gen_range(0..=2 * k)) };
    match cell {
        Cell::Color => s.cl = Color::new(rng.gen_range(0..5)).expect("in range"),
        Cell::Mode => s.mode = if rng.gen() { Mode::A } else { Mode::P },
        Cell::Rst => s.rst = rng.gen(),
        Cell::Root => s.bfs.root = id(rng),
        Cell::Lvl => s.bfs.lvl = rng.gen_range(0..=n),
        Cell::Parent => s.bfs.parent = opt_id(rng),
        Cell::Height => s.base.height = rng.gen_range(0..=k / 2),
        Cell::InitGroup => s.base.init_group = id(rng),
        Cell::Group => s.base.group = id(rng),
        Cell::InGroup => s.base.in_group = id(rng),
        Cell::Slot(u, f) => {
            let x: &mut Slot = s.base.slots.get_mut(&u).expect("cell lists existing keys");
            match f {
                0 => x.dist = dist(rng),
                1 => x.group_d = dist(rng),
                2 => x.merge_d = dist(rng),
                3 => x.stamp_d = dist(rng),
                4 => x.border = opt_id(rng),
                5 => x.far = opt_id(rng),
                6 => x.target = opt_id(rng),
                7 => x.stamp1 = opt_id(rng),
                8 => x.stamp2 = opt_id(rng),
                9 => x.groups = opt_id(rng),
                10 => x.merging = rng.gen(),
                11 => x.stamp_on = rng.gen(),
                12 => x.prior = rng.gen(),
                13 => x.in_groups = opt_id(rng),
                14 => x.in_group_d = dist(rng),
                15 => x.in_stamp_on = rng.gen(),
                16 => x.in_prior = rng.gen(),
                17 => x.in_stamp1 = opt_id(rng),
                18 => x.in_stamp2 = opt_id(rng),
                _ => x.in_stamp_d = dist(rng),
            }
        }
    }
}

/// Overwrites variables of the requested classes with random in-range
/// values. Returns how many variables were rewritten.
pub fn corrupt(graph: &Graph, cfg: &mut Configuration<GState>, k: u32, spec: &CorruptionSpec) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cells: Vec<(usize, Cell)> = cfg
        .states()
        .iter()
        .enumerate()
        .flat_map(|(i, s)| cells_of(s).filter(|&c| selects(&spec.vars, c)).map(move |c| (i, c)))
        .collect();
    let take = match spec.count {
        CorruptCount::All => cells.len(),
        CorruptCount::Exactly(c) => c.min(cells.len()),
        CorruptCount::Percent(p) => (variable_count(cfg) * p as usize / 100).min(cells.len()),
    };
    let (chosen, _) = cells.partial_shuffle(&mut rng, take);
    let mut ids: Vec<ProcessId> = graph.ids().to_vec();
    ids.extend(false_ids(graph, 1));
    let n = graph.len() as u32;
    for &(i, cell) in chosen.iter() {
        scramble(&mut cfg.states_mut()[i], cell, &ids, k, n, &mut rng);
    }
    take
}

/// What the monitor saw when a color wave completed at the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheck {
    pub step: usize,
    pub mode: Mode,
    /// Group count of the copy-shifted configuration.
    pub groups: usize,
    /// Processes whose error predicate holds after the copy shift.
    pub error_after_copy: Vec<ProcessId>,
    pub unsound_stamps: Vec<(ProcessId, ProcessId)>,
    pub potential: Potential,
    /// Rounds the merge pass needs from this boundary's copy-shifted
    /// configuration, when measured.
    pub merge_rounds: Option<usize>,
    /// Whether the checks were binding (the wave machinery had already
    /// produced one error-free shifted configuration).
    pub binding: bool,
}

#[derive(Debug, Clone, Default)]
pub struct MonitorOptions {
    pub corruption: Option<CorruptionSpec>,
    /// Also measure each merge execution in isolation.
    pub measure_merge: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: RunOutcome,
    /// Copy-shift waves completed at the root.
    pub iterations: usize,
    pub boundaries: Vec<BoundaryCheck>,
    pub violations: Vec<String>,
    pub corrupted: usize,
    pub report: GroupingReport,
    /// Final configuration is in the terminal set of the composition.
    pub cfin: bool,
    pub final_config: Configuration<GState>,
    pub summary: TraceSummary,
}

impl RunResult {
    /// Terminated, legitimate grouping, no boundary violation.
    pub fn ok(&self) -> bool {
        self.outcome.verdict == Verdict::Terminated && self.report.verdict && self.violations.is_empty()
    }
}

/// Short, deterministic digest of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub rounds: usize,
    pub verdict: Verdict,
    pub iterations: usize,
    pub groups: usize,
    /// FNV-1a hash of every trace line.
    pub digest: String,
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }

    fn feed(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
}

fn step_line(rec: &StepRecord<KLabel>) -> String {
    let mut v = json!({
        "step": rec.index,
        "selected": rec.selected,
        "fired": rec.fired.iter().map(ToString::to_string).collect::<Vec<_>>(),
    });
    if rec.round_end {
        v["round_end"] = json!(true);
    }
    v.to_string()
}

/// Actions that raise a reset or move the tree, either of which voids the
/// wave in progress.
fn disturbs_wave(label: &KLabel) -> bool {
    matches!(
        label,
        LoopLabel::Bfs(_)
            | LoopLabel::ColorInit34
            | LoopLabel::Error
            | LoopLabel::AFindsP
            | LoopLabel::AEnabled(_)
            | LoopLabel::PEnabled(_)
            | LoopLabel::Illegal
            | LoopLabel::PropagateReset
    )
}

struct Monitor<'a> {
    instance: &'a Instance,
    root: ProcessId,
    wave_open: bool,
    clean: bool,
    measure_merge: bool,
    iterations: usize,
    boundaries: Vec<BoundaryCheck>,
    violations: Vec<String>,
}

impl Monitor<'_> {
    fn reset(&mut self) {
        self.wave_open = false;
        self.clean = false;
    }

    fn observe(&mut self, engine: &Engine<'_, KLoop>, rec: &StepRecord<KLabel>) {
        let graph = engine.graph();
        let cfg = engine.config();
        if rec.fired.iter().any(disturbs_wave) {
            self.wave_open = false;
        }
        let Some(pos) = rec.selected.iter().position(|&v| v == self.root) else {
            return;
        };
        let root_state = cfg.get(graph, self.root).expect("root exists");
        match rec.fired[pos] {
            // the root starts a wave: everyone else must still be at 0
            LoopLabel::Down if root_state.cl.get() == 1 => {
                self.wave_open = bfs::is_legitimate(graph, cfg)
                    && graph
                        .ids()
                        .iter()
                        .zip(cfg.states())
                        .all(|(&v, s)| v == self.root || s.cl == Color::ZERO);
            }
            LoopLabel::To4A if self.clean => self.iterations += 1,
            LoopLabel::To2 if self.wave_open => {
                self.wave_open = false;
                self.boundary(engine, rec.index);
            }
            _ => {}
        }
    }

    fn boundary(&mut self, engine: &Engine<'_, KLoop>, step: usize) {
        let graph = engine.graph();
        let cfg = engine.config();
        let base = &self.instance.base;
        let k = base.k();
        let mode = cfg.states()[0].mode;
        // no reset and no tree change since the wave left the root
        let settled = bfs::is_legitimate(graph, cfg)
            && cfg.states().iter().all(|s| s.cl.get() == 2 && !s.rst && s.mode == mode)
            && (0..graph.len()).all(|i| {
                let view = cfg.view(graph, i);
                match mode {
                    Mode::A => base.a_move(&view).is_none(),
                    Mode::P => base.p_move(&view).is_none(),
                }
            });
        if !settled {
            self.violations.push(format!("step {step}: undisturbed wave closed on an unsettled configuration"));
            return;
        }
        let shifted = match mode {
            Mode::A => copy_shift(base, cfg),
            Mode::P => {
                let mut c = cfg.clone();
                c.states_mut().iter_mut().for_each(|s| s.mode = Mode::A);
                c
            }
        };
        let error_after_copy: Vec<ProcessId> = (0..graph.len())
            .filter(|&i| base.error(&shifted.view(graph, i)))
            .map(|i| graph.id_at(i))
            .collect();
        let unsound = unsound_stamps(graph, &shifted, k);
        let report = check_lk_config(graph, &shifted, k);
        let binding = self.clean && mode == Mode::A;
        if binding {
            if !error_after_copy.is_empty() {
                self.violations
                    .push(format!("step {step}: error predicate holds after copy shift at {error_after_copy:?}"));
            }
            if !unsound.is_empty() {
                self.violations.push(format!("step {step}: stamps between mergeable groups {unsound:?}"));
            }
            let bound = 2 * graph.len() / k as usize + 1;
            if report.group_count > bound {
                self.violations
                    .push(format!("step {step}: {} groups exceed {bound}", report.group_count));
            }
        }
        let merge_rounds = self.measure_merge.then(|| {
            let alg = BaseOnly(base);
            let mut e = Engine::new(graph, &alg, shifted.clone(), DaemonPolicy::synchronous());
            e.run(default_budget(graph)).map(|o| o.rounds).unwrap_or(usize::MAX)
        });
        log::debug!(
            "step {step}: {mode:?} wave done, {} groups, potential {}",
            report.group_count,
            potential(graph, &shifted, k).total
        );
        self.boundaries.push(BoundaryCheck {
            step,
            mode,
            groups: report.group_count,
            error_after_copy: error_after_copy.clone(),
            unsound_stamps: unsound,
            potential: potential(graph, &shifted, k),
            merge_rounds,
            binding,
        });
        // a P boundary ends a full reinitialization; an A boundary whose
        // shifted configuration is error free starts a clean chain
        if mode == Mode::P || error_after_copy.is_empty() {
            self.clean = true;
        }
    }
}

/// Runs the instance to termination or budget, checking every completed
/// wave. Trace lines go to `trace` when given.
pub fn execute(instance: &Instance, opts: &MonitorOptions, mut trace: Option<&mut dyn Write>) -> Result<RunResult, ExperimentError> {
    let graph = &instance.graph;
    let alg = instance.base.looped(graph);
    let mut engine = Engine::new(graph, &alg, instance.init.clone(), instance.daemon.clone());
    let mut monitor = Monitor {
        instance,
        root: graph.ids()[0],
        wave_open: false,
        clean: false,
        measure_merge: opts.measure_merge,
        iterations: 0,
        boundaries: Vec::new(),
        violations: Vec::new(),
    };
    let mut hash = Fnv::new();
    let mut write_err: Option<io::Error> = None;
    let mut emit = |line: &str, trace: &mut Option<&mut dyn Write>| {
        hash.feed(line.as_bytes());
        hash.feed(b"\n");
        if let Some(w) = trace.as_mut() {
            if let Err(e) = writeln!(w, "{line}") {
                write_err.get_or_insert(e);
            }
        }
    };

    let mut corrupted = 0;
    if let Some(spec) = opts.corruption.as_ref().filter(|s| !s.is_noop()) {
        // an early termination still gets corrupted: the final configuration
        // must be able to recover too
        engine.run_observed(spec.at.min(instance.max_steps), |e, rec| {
            monitor.observe(e, rec);
            emit(&step_line(rec), &mut trace);
        })?;
        let k = instance.k();
        engine.perturb(|g, cfg| corrupted = corrupt(g, cfg, k, spec));
        monitor.reset();
        log::info!("corrupted {corrupted} variables after step {}", engine.steps());
        let marker = json!({ "corrupted": corrupted, "after_step": engine.steps() }).to_string();
        emit(&marker, &mut trace);
    }
    let remaining = instance.max_steps - engine.steps() as u64;
    let outcome = engine.run_observed(remaining, |e, rec| {
        monitor.observe(e, rec);
        emit(&step_line(rec), &mut trace);
    })?;

    let cfg = engine.config().clone();
    let report = check_lk_config(graph, &cfg, instance.k());
    let summary = TraceSummary {
        steps: outcome.steps,
        rounds: outcome.rounds,
        verdict: outcome.verdict,
        iterations: monitor.iterations,
        groups: report.group_count,
        digest: String::new(),
    };
    let line = json!({ "summary": { "rounds": summary.rounds, "steps": summary.steps, "verdict": summary.verdict } })
        .to_string();
    emit(&line, &mut trace);
    if let Some(e) = write_err {
        return Err(ExperimentError::Trace(e));
    }
    let summary = TraceSummary {
        digest: format!("{:016x}", hash.0),
        ..summary
    };
    Ok(RunResult {
        outcome,
        iterations: monitor.iterations,
        boundaries: monitor.boundaries,
        violations: monitor.violations,
        corrupted,
        cfin: check_cfin(graph, &instance.base, &cfg),
        report,
        final_config: cfg,
        summary,
    })
}

/// Family names accepted by [`family_graph`].
pub const FAMILIES: [&str; 4] = ["path", "cycle", "grid", "random-gnp"];

/// Builds an `n`-process graph of the named family; `seed` only matters
/// for random families.
pub fn family_graph(family: &str, n: u32, seed: u64) -> Result<Graph, ExperimentError> {
    use crate::generate;
    Ok(match family {
        "path" => generate::path(n)?,
        "cycle" => generate::cycle(n)?,
        "grid" => generate::grid(n)?,
        "random-gnp" => generate::random_gnp(n, &mut ChaCha8Rng::seed_from_u64(seed))?,
        other => return Err(ExperimentError::Descriptor(format!("unknown family {other:?}"))),
    })
}

/// One line of a scaling sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub n: usize,
    #[serde(rename = "D")]
    pub diameter: u32,
    pub k: u32,
    pub seed: u64,
    pub rounds: usize,
    pub iterations: usize,
    pub groups: usize,
    pub verdict: bool,
}

impl SweepRow {
    pub const HEADER: &'static str = "family,n,D,k,seed,rounds,iterations,groups,verdict";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.family, self.n, self.diameter, self.k, self.seed, self.rounds, self.iterations, self.groups, self.verdict
        )
    }
}

/// The cross product of families, sizes, bounds and seeds `0..seeds`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepPlan {
    pub families: Vec<String>,
    pub ns: Vec<u32>,
    pub ks: Vec<u32>,
    pub seeds: u64,
}

impl SweepPlan {
    /// Jobs in output order.
    pub fn jobs(&self) -> Vec<(String, u32, u32, u64)> {
        let mut out = Vec::new();
        for f in &self.families {
            for &n in &self.ns {
                for &k in &self.ks {
                    for seed in 0..self.seeds {
                        out.push((f.clone(), n, k, seed));
                    }
                }
            }
        }
        out
    }

    /// Runs every job on up to `threads` workers; results come back in
    /// [`SweepPlan::jobs`] order regardless of scheduling.
    pub fn run(&self, threads: usize) -> Vec<Result<SweepRow, ExperimentError>> {
        let jobs = self.jobs();
        let chunk = jobs.len().div_ceil(threads.max(1)).max(1);
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs
                .chunks(chunk)
                .map(|c| s.spawn(move || c.iter().map(|(f, n, k, seed)| sweep_one(f, *n, *k, *seed)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("sweep worker panicked"))
                .collect()
        })
    }
}

/// Runs one sweep instance: zeroed start, random daemon seeded by `seed`.
pub fn sweep_one(family: &str, n: u32, k: u32, seed: u64) -> Result<SweepRow, ExperimentError> {
    let graph = family_graph(family, n, seed)?;
    let diameter = graph.diameter();
    let instance = Instance::zeroed(graph, k, DaemonPolicy::random(0.5, seed))?;
    let result = execute(&instance, &MonitorOptions::default(), None)?;
    Ok(SweepRow {
        family: family.to_string(),
        n: n as usize,
        diameter,
        k,
        seed,
        rounds: result.outcome.rounds,
        iterations: result.iterations,
        groups: result.report.group_count,
        verdict: result.ok(),
    })
}
