//! Batch experiment matrices: a suite file describes a cartesian product of
//! graphs, fault counts, team sizes, wake policies, and adversary scripts;
//! every cell is simulated and judged against the suite's declared
//! invariants, and the results aggregate into JSON and CSV reports.
//!
//! Cells are independent — each builds its own instance and behaviors from
//! the suite seed — so they run in a small worker pool without shared
//! mutable state, and a cell's result is identical no matter which worker
//! picks it up.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{builtin_script, ScriptSpec, WakePolicy};
use crate::behavior::Behavior;
use crate::engine::{run, RunConfig};
use crate::engine::trace::Termination;
use crate::explo::{provide_sequence, ExploSeq};
use crate::graph::{
    enumerate_graphs, make_oriented_ring, validate_instance, AgentSpec, Instance, PortGraph,
    DEFAULT_CORPUS_SEED, SCHEMA_VERSION,
};
use crate::protocols::gather::{gather_behavior, n_from_gk};
use crate::protocols::group::group_behavior;
use crate::protocols::merge::merge_behavior;

pub const SUITE_SCHEMA_VERSION: u32 = 1;

/// Largest graphs the corpus enumerates.
const CORPUS_MAX: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Gather,
    Group,
    Merge,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Gather => "gather",
            Protocol::Group => "group",
            Protocol::Merge => "merge",
        }
    }
}

/// One graph axis entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSel {
    /// Oriented ring of the given size.
    Ring { size: usize },
    /// The index-th graph (by enumeration order) of the seeded corpus of
    /// connected graphs with at most `size` nodes.
    Corpus { size: usize, index: usize },
}

impl GraphSel {
    fn describe(&self) -> String {
        match self {
            GraphSel::Ring { size } => format!("ring{size}"),
            GraphSel::Corpus { size, index } => format!("corpus{size}#{index}"),
        }
    }
}

/// One wake-policy axis entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WakeSel {
    Simultaneous,
    Staggered { step: u64 },
    AdversarialLatest { round: u64 },
}

impl WakeSel {
    fn policy(&self) -> WakePolicy {
        match self {
            WakeSel::Simultaneous => WakePolicy::Simultaneous,
            WakeSel::Staggered { step } => WakePolicy::Staggered(*step),
            WakeSel::AdversarialLatest { round } => WakePolicy::AdversarialLatest(*round),
        }
    }

    fn describe(&self) -> String {
        match self {
            WakeSel::Simultaneous => "simultaneous".into(),
            WakeSel::Staggered { step } => format!("staggered({step})"),
            WakeSel::AdversarialLatest { round } => format!("adversarial_latest({round})"),
        }
    }
}

/// A property every cell of the suite must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Invariant {
    /// Every good agent declares gathering at one common (round, node).
    CommonDeclare,
    /// No good agent declares before all good agents are present.
    NoPrematureDeclare,
    /// At least `min_agents` good agents terminate (declare or complete) at
    /// one common (round, node).
    CommonTermination { min_agents: usize },
    /// Every good agent terminates within `bound` rounds of its wake.
    WithinRounds { bound: u64 },
}

/// A suite file: the experiment matrix plus judging rules.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub schema_version: u32,
    pub protocol: Protocol,
    pub graphs: Vec<GraphSel>,
    pub byzantine_counts: Vec<u32>,
    pub good_counts: Vec<usize>,
    pub wakes: Vec<WakeSel>,
    /// Script given to every Byzantine agent of a cell; the axis is skipped
    /// for fault-free cells.
    pub scripts: Vec<ScriptSpec>,
    pub invariants: Vec<Invariant>,
    pub horizon: u64,
    pub seed: u64,
}

impl SuiteSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite specs serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, SuiteError> {
        let spec: SuiteSpec = serde_json::from_str(s).map_err(|e| SuiteError::Parse(e.to_string()))?;
        if spec.schema_version != SUITE_SCHEMA_VERSION {
            return Err(SuiteError::Parse(format!(
                "schema version {} (expected {})",
                spec.schema_version, SUITE_SCHEMA_VERSION
            )));
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, Error)]
pub enum SuiteError {
    #[error("suite file rejected: {0}")]
    Parse(String),
}

/// One fully-specified cell of the matrix.
#[derive(Clone, Debug)]
struct Cell {
    index: usize,
    graph: GraphSel,
    f: u32,
    good_count: usize,
    wake: WakeSel,
    script: Option<ScriptSpec>,
}

/// Result of one cell.
#[derive(Clone, Debug, Serialize)]
pub struct CellResult {
    pub cell: usize,
    pub graph: String,
    pub f: u32,
    pub good_count: usize,
    pub wake: String,
    pub script: Option<String>,
    pub passed: bool,
    /// Which invariants failed, in suite order, with detail.
    pub failures: Vec<String>,
    /// Hard error (invalid instance, engine refusal) if the cell never ran.
    pub error: Option<String>,
    pub final_round: u64,
    pub executed_rounds: u64,
}

/// Aggregate over all cells.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub protocol: Protocol,
    pub passed: usize,
    pub failed: usize,
    pub cells: Vec<CellResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite reports serialize")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "cell,graph,f,good_count,wake,script,passed,failures,error,final_round,executed_rounds\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                c.cell,
                c.graph,
                c.f,
                c.good_count,
                c.wake,
                c.script.as_deref().unwrap_or("-"),
                c.passed,
                csv_field(&c.failures.join("; ")),
                csv_field(c.error.as_deref().unwrap_or("")),
                c.final_round,
                c.executed_rounds,
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn script_name(s: &ScriptSpec) -> String {
    match s {
        ScriptSpec::Inert => "inert".into(),
        ScriptSpec::RandomWalk { seed } => format!("random_walk({seed})"),
        ScriptSpec::LabelForger { target_label } => format!("label_forger({target_label})"),
        ScriptSpec::StateMimic { state, duration } => format!("state_mimic({state},{duration})"),
        ScriptSpec::OptimistSpoofer => "optimist_spoofer".into(),
    }
}

/// Expands the matrix into its cells.
fn cells_of(spec: &SuiteSpec) -> Vec<Cell> {
    let mut out = Vec::new();
    for &graph in &spec.graphs {
        for &f in &spec.byzantine_counts {
            for &good_count in &spec.good_counts {
                for &wake in &spec.wakes {
                    let scripts: Vec<Option<ScriptSpec>> = if f == 0 {
                        vec![None]
                    } else if spec.scripts.is_empty() {
                        vec![Some(ScriptSpec::Inert)]
                    } else {
                        spec.scripts.iter().cloned().map(Some).collect()
                    };
                    for script in scripts {
                        out.push(Cell {
                            index: out.len(),
                            graph,
                            f,
                            good_count,
                            wake,
                            script,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Runs every cell of the suite on `workers` threads.
pub fn run_suite(spec: &SuiteSpec, workers: usize) -> SuiteReport {
    let cells = cells_of(spec);
    let results: Mutex<Vec<Option<CellResult>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    let workers = workers.max(1).min(cells.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let r = run_cell(spec, cell);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let cells: Vec<CellResult> = results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect();
    let passed = cells.iter().filter(|c| c.passed).count();
    SuiteReport {
        schema_version: SUITE_SCHEMA_VERSION,
        protocol: spec.protocol,
        passed,
        failed: cells.len() - passed,
        cells,
    }
}

fn base_result(cell: &Cell) -> CellResult {
    CellResult {
        cell: cell.index,
        graph: cell.graph.describe(),
        f: cell.f,
        good_count: cell.good_count,
        wake: cell.wake.describe(),
        script: cell.script.as_ref().map(script_name),
        passed: false,
        failures: Vec::new(),
        error: None,
        final_round: 0,
        executed_rounds: 0,
    }
}

fn cell_graph(sel: &GraphSel, seed: u64) -> Result<PortGraph, String> {
    match sel {
        GraphSel::Ring { size } => make_oriented_ring(*size).map_err(|e| e.to_string()),
        GraphSel::Corpus { size, index } => {
            let corpus = enumerate_graphs((*size).min(CORPUS_MAX), seed).map_err(|e| e.to_string())?;
            let graphs = corpus.graphs();
            graphs
                .get(*index)
                .cloned()
                .ok_or_else(|| format!("corpus has {} graphs, index {index} out of range", graphs.len()))
        }
    }
}

/// Smallest global knowledge whose size bound covers `n` nodes.
pub fn gk_for(n: usize) -> u32 {
    let mut gk = 1;
    while (n_from_gk(gk).expect("desk-scale graphs fit the table") as usize) < n {
        gk += 1;
    }
    gk
}

fn run_cell(spec: &SuiteSpec, cell: &Cell) -> CellResult {
    let mut res = base_result(cell);
    match try_run_cell(spec, cell, &mut res) {
        Ok(()) => res,
        Err(e) => {
            res.error = Some(e);
            res.passed = false;
            res
        }
    }
}

fn try_run_cell(spec: &SuiteSpec, cell: &Cell, res: &mut CellResult) -> Result<(), String> {
    let graph = cell_graph(&cell.graph, DEFAULT_CORPUS_SEED)?;
    let n = graph.node_count();
    let gk = gk_for(n);
    let bound = n_from_gk(gk).expect("covered by gk_for") as usize;
    let corpus = enumerate_graphs(n.min(CORPUS_MAX), DEFAULT_CORPUS_SEED).map_err(|e| e.to_string())?;
    let seq = provide_sequence(bound, &corpus).map_err(|e| e.to_string())?;

    // Per-cell deterministic placement: the suite seed plus the cell index.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (cell.index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut agents = Vec::new();
    // MERGE's contract has the good agents co-starting (it is the procedure
    // run by an already-formed group); the other protocols start anywhere.
    let shared_start = rng.gen_range(0..n);
    for label in 1..=cell.good_count as u64 {
        let start_node = match spec.protocol {
            Protocol::Merge => shared_start,
            _ => rng.gen_range(0..n),
        };
        agents.push(AgentSpec { label, start_node, byzantine: false, script: None });
    }
    for i in 0..cell.f as u64 {
        agents.push(AgentSpec {
            label: 1000 + i,
            start_node: rng.gen_range(0..n),
            byzantine: true,
            script: Some(cell.script.clone().unwrap_or(ScriptSpec::Inert)),
        });
    }
    let good_idx: Vec<usize> = (0..cell.good_count).collect();
    let wake_schedule: BTreeMap<usize, u64> = cell.wake.policy().schedule(&good_idx);
    let instance = Instance {
        schema_version: SCHEMA_VERSION,
        graph,
        agents,
        wake_schedule,
        gk,
        size_bound: bound,
    };
    let violations = validate_instance(&instance);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(format!("invalid instance: {}", msgs.join("; ")));
    }

    let behaviors: Vec<Box<dyn Behavior>> = instance
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| -> Result<Box<dyn Behavior>, String> {
            if a.byzantine {
                Ok(builtin_script(a.script.as_ref().expect("set above"), a.label))
            } else {
                protocol_behavior(spec.protocol, a.label, i, &seq, gk).map_err(|e| e.to_string())
            }
        })
        .collect::<Result<_, _>>()?;

    let result = run(&instance, behaviors, &RunConfig::compressed(spec.horizon))
        .map_err(|e| e.to_string())?;
    res.final_round = result.summary.final_round;
    res.executed_rounds = result.summary.executed_rounds;

    for inv in &spec.invariants {
        if let Some(msg) = check_invariant(inv, &result.summary, &instance) {
            res.failures.push(msg);
        }
    }
    res.passed = res.failures.is_empty();
    Ok(())
}

/// Behavior of one good agent under the given protocol.
pub fn protocol_behavior(
    protocol: Protocol,
    label: u64,
    agent_index: usize,
    seq: &ExploSeq,
    gk: u32,
) -> Result<Box<dyn Behavior>, crate::protocols::gather::GatherError> {
    match protocol {
        Protocol::Gather => gather_behavior(label, gk, seq),
        // The standalone procedures take the wake spread bound T; one full
        // exploration is the spread every suite wake policy stays within.
        Protocol::Group => Ok(group_behavior(label, seq.x_n(), (agent_index % 2) as u8, seq)?),
        Protocol::Merge => Ok(merge_behavior(label, seq.x_n(), seq)?),
    }
}

fn check_invariant(
    inv: &Invariant,
    summary: &crate::engine::Summary,
    instance: &Instance,
) -> Option<String> {
    let goods: Vec<&crate::engine::trace::AgentSummary> =
        summary.agents.iter().filter(|a| !a.byzantine).collect();
    match inv {
        Invariant::CommonDeclare => {
            if summary.common_declare().is_some() {
                None
            } else {
                Some("common_declare: good agents did not all declare together".into())
            }
        }
        Invariant::NoPrematureDeclare => {
            let labels = summary.premature_declares();
            if labels.is_empty() {
                None
            } else {
                Some(format!("no_premature_declare: premature declares by labels {labels:?}"))
            }
        }
        Invariant::CommonTermination { min_agents } => {
            let mut by_site: BTreeMap<(u64, u32), usize> = BTreeMap::new();
            for a in &goods {
                if let Termination::Declared { round, node } | Termination::Completed { round, node } =
                    a.termination
                {
                    *by_site.entry((round, node)).or_default() += 1;
                }
            }
            let best = by_site.values().copied().max().unwrap_or(0);
            if best >= *min_agents {
                None
            } else {
                Some(format!(
                    "common_termination: largest common terminus has {best} agents, needed {min_agents}"
                ))
            }
        }
        Invariant::WithinRounds { bound } => {
            let mut late = Vec::new();
            for a in &goods {
                let end = match a.termination {
                    Termination::Declared { round, .. } | Termination::Completed { round, .. } => round,
                    _ => summary.final_round,
                };
                let ok = matches!(
                    a.termination,
                    Termination::Declared { .. } | Termination::Completed { .. }
                ) && end.saturating_sub(a.wake_round.unwrap_or(0)) <= *bound;
                if !ok {
                    late.push(a.label);
                }
            }
            let _ = instance;
            if late.is_empty() {
                None
            } else {
                Some(format!("within_rounds: labels {late:?} missed the {bound}-round bound"))
            }
        }
    }
}
