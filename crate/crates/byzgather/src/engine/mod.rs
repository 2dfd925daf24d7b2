//! The deterministic synchronous-round engine.
//!
//! Rounds proceed in three phases: every awake agent *announces*, every agent
//! *observes* the announcement multiset at its node, then every agent *acts*;
//! moves take effect at the next round boundary. Dormant agents wake when
//! their scheduled round arrives or the moment a non-dormant agent stands at
//! their node.
//!
//! ## Compression
//!
//! Protocol round counts reach ~10^12 on four-node graphs, so the engine
//! must not execute quiet rounds literally. Compression here is *per agent*:
//! an agent whose declared [`next_interesting_round`] lies in the future and
//! whose node is undisturbed is frozen — not invoked at all — and the rounds
//! it slept through are flushed lazily via [`Behavior::skip`] when something
//! next concerns it. When every awake agent is frozen the clock jumps
//! directly to the next event (earliest interesting round or scheduled
//! wake-up). The uncompressed engine executes every round literally and is
//! the semantic reference; both produce identical expanded traces.
//!
//! [`next_interesting_round`]: crate::behavior::Behavior::next_interesting_round
//! [`Behavior::skip`]: crate::behavior::Behavior::skip

pub mod trace;

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::behavior::{Action, Announcement, Behavior, BehaviorStatus, Observation, RoundCtx};
use crate::graph::{validate_instance, Instance, Violation};

pub use trace::{
    announcement_digest, AgentSummary, RunOutcome, StepRecord, Termination, Trace, TraceEvent,
    TraceMode,
};

/// Configuration of one simulation run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Rounds with number < horizon are simulated.
    pub horizon: u64,
    /// Per-agent freezing + clock jumps when true; literal rounds when false.
    pub compressed: bool,
    pub trace_mode: TraceMode,
    /// Record this agent's full per-round observation stream (run-length
    /// encoded) for the fooling harness.
    pub record_observations_for: Option<usize>,
    /// Compressed engine only: re-announce frozen agents each executed round
    /// and compare against their cached announcement, reporting a
    /// compression-contract violation on mismatch. Costs the freezing
    /// speed-up; meant for audits and bug hunts.
    pub audit_frozen: bool,
}

impl RunConfig {
    pub fn compressed(horizon: u64) -> Self {
        RunConfig {
            horizon,
            compressed: true,
            trace_mode: TraceMode::DigestOnly,
            record_observations_for: None,
            audit_frozen: false,
        }
    }

    pub fn uncompressed(horizon: u64) -> Self {
        RunConfig { compressed: false, ..Self::compressed(horizon) }
    }

    pub fn with_full_trace(mut self) -> Self {
        self.trace_mode = TraceMode::Full;
        self
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid instance: {0:?}")]
    InvalidInstance(Vec<Violation>),
    #[error("behavior count {got} does not match agent count {expected}")]
    BehaviorCount { expected: usize, got: usize },
    #[error("horizon must be at least 1")]
    BadHorizon,
}

/// Machine-readable result summary of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub outcome: RunOutcome,
    /// Last simulated round.
    pub final_round: u64,
    /// Rounds in which at least one agent was actually invoked.
    pub executed_rounds: u64,
    /// Total agent-rounds elapsed inside frozen spans.
    pub skipped_agent_rounds: u64,
    pub agents: Vec<AgentSummary>,
    pub trace_digest: String,
}

impl Summary {
    /// The common (round, node) at which **all** good agents declared, if
    /// they did.
    pub fn common_declare(&self) -> Option<(u64, u32)> {
        let mut common = None;
        for a in self.agents.iter().filter(|a| !a.byzantine) {
            match a.termination {
                Termination::Declared { round, node } => match common {
                    None => common = Some((round, node)),
                    Some(c) if c == (round, node) => {}
                    _ => return None,
                },
                _ => return None,
            }
        }
        common
    }

    /// Whether any good agent declared at a (round, node) at which some other
    /// good agent was absent or non-declaring — a premature declaration.
    pub fn premature_declares(&self) -> Vec<u64> {
        let declares: Vec<_> = self
            .agents
            .iter()
            .filter(|a| !a.byzantine)
            .filter_map(|a| match a.termination {
                Termination::Declared { round, node } => Some((a.label, round, node)),
                _ => None,
            })
            .collect();
        let good_count = self.agents.iter().filter(|a| !a.byzantine).count();
        declares
            .iter()
            .filter(|&&(_, r, v)| {
                declares.iter().filter(|&&(_, r2, v2)| (r2, v2) == (r, v)).count() != good_count
            })
            .map(|&(l, _, _)| l)
            .collect()
    }
}

/// One RLE entry of the recorded subject stream: `count` consecutive rounds
/// starting at `start_round` with identical observation and action.
#[derive(Clone, Debug)]
pub struct SubjectEntry {
    pub start_round: u64,
    pub count: u64,
    pub entry_port: Option<u16>,
    pub degree: u16,
    pub announcement: Announcement,
    pub co_located: Arc<[Announcement]>,
    pub action: Action,
}

/// The run-length-encoded per-round record of one agent's run.
#[derive(Clone, Debug, Default)]
pub struct SubjectLog {
    pub entries: Vec<SubjectEntry>,
}

impl SubjectLog {
    /// Total rounds covered.
    pub fn rounds(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// The observation part (entry port, degree, co-located multiset) as an
    /// RLE stream, for cross-run comparison.
    pub fn observation_stream(&self) -> Vec<(u64, u64, Option<u16>, u16, Vec<Announcement>)> {
        let mut out: Vec<(u64, u64, Option<u16>, u16, Vec<Announcement>)> = Vec::new();
        for e in &self.entries {
            let obs = (e.entry_port, e.degree, e.co_located.to_vec());
            if let Some(last) = out.last_mut() {
                if last.0 + last.1 == e.start_round && (last.2, last.3, &last.4) == (obs.0, obs.1, &obs.2) {
                    last.1 += e.count;
                    continue;
                }
            }
            out.push((e.start_round, e.count, obs.0, obs.1, obs.2));
        }
        out
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub summary: Summary,
    pub trace: Trace,
    pub subject_log: Option<SubjectLog>,
}

const NO_ROUND: u64 = u64::MAX;

struct AgentRt {
    label: u64,
    byzantine: bool,
    node: usize,
    awake: bool,
    retired: bool,
    wake_round: Option<u64>,
    /// Port of arrival, present only during the arrival round.
    entry_port: Option<u16>,
    ann: Announcement,
    ann_digest: u64,
    action: Action,
    niv: u64,
    /// Last round covered by this agent's emitted trace.
    last_invoked: u64,
    termination: Termination,
}

struct NodeState {
    /// Awake agents, sorted by (claimed label, agent index); `anns` is the
    /// parallel announcement list — the observation slice.
    order: Vec<(u64, u32)>,
    anns: Vec<Announcement>,
    dormant: Vec<u32>,
}

impl NodeState {
    fn insert(&mut self, label: u64, agent: u32, ann: Announcement) {
        let pos = self.order.partition_point(|&k| k < (label, agent));
        self.order.insert(pos, (label, agent));
        self.anns.insert(pos, ann);
    }

    fn remove(&mut self, label: u64, agent: u32) {
        let pos = self.order.partition_point(|&k| k < (label, agent));
        debug_assert!(self.order.get(pos) == Some(&(label, agent)));
        self.order.remove(pos);
        self.anns.remove(pos);
    }

    fn update_ann(&mut self, old_label: u64, agent: u32, ann: Announcement) {
        let new_label = ann.claimed_label;
        if new_label == old_label {
            let pos = self.order.partition_point(|&k| k < (old_label, agent));
            debug_assert!(self.order.get(pos) == Some(&(old_label, agent)));
            self.anns[pos] = ann;
        } else {
            self.remove(old_label, agent);
            self.insert(new_label, agent, ann);
        }
    }
}

/// Runs one simulation. `behaviors` must align with `inst.agents`.
///
/// Byzantine agents are awake from round 0 regardless of the wake schedule
/// (their scripts may self-delay); good agents wake per schedule or by
/// co-location with an awake agent.
pub fn run(
    inst: &Instance,
    behaviors: Vec<Box<dyn Behavior>>,
    cfg: &RunConfig,
) -> Result<RunResult, EngineError> {
    let report = validate_instance(inst);
    if !report.is_empty() {
        return Err(EngineError::InvalidInstance(report));
    }
    if behaviors.len() != inst.agents.len() {
        return Err(EngineError::BehaviorCount { expected: inst.agents.len(), got: behaviors.len() });
    }
    if cfg.horizon == 0 {
        return Err(EngineError::BadHorizon);
    }
    Ok(Engine::new(inst, behaviors, cfg).run())
}

struct Engine<'a> {
    inst: &'a Instance,
    cfg: &'a RunConfig,
    agents: Vec<AgentRt>,
    behaviors: Vec<Box<dyn Behavior>>,
    nodes: Vec<NodeState>,
    /// (round, agent), sorted ascending; byzantine agents wake at round 0.
    wake_list: Vec<(u64, u32)>,
    wake_ptr: usize,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
    /// Nodes whose composition changes take effect at `affected_round`.
    affected: Vec<usize>,
    affected_round: u64,
    node_stamp: Vec<u64>,
    agent_stamp: Vec<u64>,
    trace: Trace,
    subject: Option<(usize, SubjectLog)>,
    executed_rounds: u64,
    skipped_agent_rounds: u64,
    good_active: usize,
    fault: Option<RunOutcome>,
}

impl<'a> Engine<'a> {
    fn new(inst: &'a Instance, behaviors: Vec<Box<dyn Behavior>>, cfg: &'a RunConfig) -> Self {
        let n = inst.graph.node_count();
        let mut nodes: Vec<NodeState> = (0..n)
            .map(|_| NodeState { order: Vec::new(), anns: Vec::new(), dormant: Vec::new() })
            .collect();
        let mut agents = Vec::with_capacity(inst.agents.len());
        let placeholder = Announcement::new(0, crate::behavior::StateTag::Idle);
        for (i, spec) in inst.agents.iter().enumerate() {
            nodes[spec.start_node].dormant.push(i as u32);
            agents.push(AgentRt {
                label: spec.label,
                byzantine: spec.byzantine,
                node: spec.start_node,
                awake: false,
                retired: false,
                wake_round: None,
                entry_port: None,
                ann: placeholder.clone(),
                ann_digest: 0,
                action: Action::Wait,
                niv: NO_ROUND,
                last_invoked: 0,
                termination: Termination::Active,
            });
        }
        let mut wake_list: Vec<(u64, u32)> = Vec::new();
        for (i, spec) in inst.agents.iter().enumerate() {
            if spec.byzantine {
                wake_list.push((0, i as u32));
            } else if let Some(&r) = inst.wake_schedule.get(&i) {
                wake_list.push((r, i as u32));
            }
        }
        wake_list.sort_unstable();
        let good_active = inst.agents.iter().filter(|a| !a.byzantine).count();
        Engine {
            inst,
            cfg,
            agents,
            behaviors,
            nodes,
            wake_list,
            wake_ptr: 0,
            heap: BinaryHeap::new(),
            affected: Vec::new(),
            affected_round: NO_ROUND,
            node_stamp: vec![NO_ROUND; n],
            agent_stamp: vec![NO_ROUND; inst.agents.len()],
            trace: Trace::new(cfg.trace_mode),
            subject: cfg.record_observations_for.map(|i| (i, SubjectLog::default())),
            executed_rounds: 0,
            skipped_agent_rounds: 0,
            good_active,
            fault: None,
        }
    }

    /// Flushes agent `a`'s frozen span through round `through` (inclusive).
    /// Must be called before any mutation of its node's observation content
    /// past that round.
    fn sync_agent(&mut self, a: usize, through: u64) {
        let rt = &mut self.agents[a];
        if !rt.awake || rt.retired || rt.last_invoked >= through {
            return;
        }
        let reps = through - rt.last_invoked;
        debug_assert_eq!(rt.action, Action::Wait, "frozen agents always wait");
        let v = rt.node;
        let node = &self.nodes[v];
        let obs = Observation {
            round: through,
            degree: self.inst.graph.degree(v),
            entry_port: None,
            co_located: &node.anns,
        };
        self.behaviors[a].skip(reps, &obs);
        let rt = &mut self.agents[a];
        let from = rt.last_invoked + 1;
        rt.last_invoked = through;
        self.skipped_agent_rounds += reps;
        self.trace.push(TraceEvent::Flush {
            from_round: from,
            reps,
            agent: a as u32,
            node: v as u32,
            state: rt.ann.claimed_state.clone(),
            ann_digest: rt.ann_digest,
        });
        if let Some((s, log)) = &mut self.subject {
            if *s == a {
                let e = log.entries.last_mut().expect("flush before first invocation");
                e.count += reps;
            }
        }
    }

    fn sync_node(&mut self, v: usize, through: u64) {
        let members: Vec<u32> = self.nodes[v].order.iter().map(|&(_, a)| a).collect();
        for a in members {
            self.sync_agent(a as usize, through);
        }
    }

    fn mark_affected(&mut self, v: usize, round: u64) {
        if self.affected_round != round {
            debug_assert!(self.affected_round == NO_ROUND || self.affected.is_empty());
        }
        if self.node_stamp[v] != round {
            self.node_stamp[v] = round;
            self.affected.push(v);
            self.affected_round = round;
        }
    }

    fn run(mut self) -> RunResult {
        let outcome;
        let mut r = match self.wake_list.first() {
            Some(&(r0, _)) => r0,
            None => 0,
        };
        if r >= self.cfg.horizon {
            // Nothing ever happens inside the horizon.
            outcome = RunOutcome::HorizonExhausted;
            let last = self.cfg.horizon - 1;
            return self.finish(outcome, last);
        }
        loop {
            match self.execute_round(r) {
                RoundVerdict::Continue => {}
                RoundVerdict::AllGoodRetired => {
                    outcome = RunOutcome::GoodAgentsTerminated;
                    return self.finish(outcome, r);
                }
                RoundVerdict::Fault => {
                    outcome = self.fault.take().expect("fault verdict carries an outcome");
                    return self.finish(outcome, r);
                }
            }
            // Pick the next round to execute.
            let next = if !self.cfg.compressed {
                r + 1
            } else if self.affected_round == r + 1 && !self.affected.is_empty() {
                r + 1
            } else {
                let mut next = self.next_wake_round().unwrap_or(NO_ROUND);
                if let Some(t) = self.peek_heap() {
                    next = next.min(t);
                }
                next
            };
            if next >= self.cfg.horizon {
                outcome = RunOutcome::HorizonExhausted;
                let last = self.cfg.horizon - 1;
                return self.finish(outcome, last);
            }
            debug_assert!(next > r, "clock must advance");
            r = next;
        }
    }

    fn next_wake_round(&self) -> Option<u64> {
        self.wake_list.get(self.wake_ptr).map(|&(t, _)| t)
    }

    /// Smallest valid interesting round in the heap (lazy deletion).
    fn peek_heap(&mut self) -> Option<u64> {
        while let Some(&Reverse((t, a))) = self.heap.peek() {
            let rt = &self.agents[a as usize];
            if rt.awake && !rt.retired && rt.niv == t {
                return Some(t);
            }
            self.heap.pop();
        }
        None
    }

    fn finish(mut self, outcome: RunOutcome, final_round: u64) -> RunResult {
        // Complete every agent's trace through the final round.
        for a in 0..self.agents.len() {
            self.sync_agent(a, final_round);
        }
        let digest = self.trace.digest_hex();
        let agents = self
            .agents
            .iter()
            .map(|rt| AgentSummary {
                label: rt.label,
                byzantine: rt.byzantine,
                wake_round: rt.wake_round,
                final_node: rt.node as u32,
                termination: rt.termination.clone(),
            })
            .collect();
        let summary = Summary {
            schema_version: crate::graph::SCHEMA_VERSION,
            outcome,
            final_round,
            executed_rounds: self.executed_rounds,
            skipped_agent_rounds: self.skipped_agent_rounds,
            agents,
            trace_digest: digest,
        };
        RunResult { summary, trace: self.trace, subject_log: self.subject.map(|(_, l)| l) }
    }

    fn execute_round(&mut self, r: u64) -> RoundVerdict {
        self.executed_rounds += 1;
        // Carry over node marks from the previous boundary.
        let mut dirty_nodes: Vec<usize> =
            if self.affected_round == r { std::mem::take(&mut self.affected) } else { Vec::new() };
        self.affected_round = NO_ROUND;

        // Phase A: wake-ups. Scheduled wakes fire; then every dormant agent
        // co-located with an awake (or just-woken) agent wakes.
        let mut woken: Vec<u32> = Vec::new();
        while let Some(&(t, a)) = self.wake_list.get(self.wake_ptr) {
            if t > r {
                break;
            }
            self.wake_ptr += 1;
            let rt = &self.agents[a as usize];
            if !rt.awake && !rt.retired {
                let v = rt.node;
                if self.node_stamp[v] != r {
                    self.node_stamp[v] = r;
                    dirty_nodes.push(v);
                }
                woken.push(a);
            }
        }
        // Mark wake targets' nodes, then wake every dormant agent on a dirty
        // node that hosts (or is about to host) an awake agent.
        let mut i = 0;
        while i < dirty_nodes.len() {
            let v = dirty_nodes[i];
            i += 1;
            let hosts_awake = !self.nodes[v].order.is_empty() || woken.iter().any(|&a| self.agents[a as usize].node == v);
            if hosts_awake && !self.nodes[v].dormant.is_empty() {
                for a in std::mem::take(&mut self.nodes[v].dormant) {
                    if !woken.contains(&a) {
                        woken.push(a);
                    }
                }
            }
        }
        // Commit wakes: remove from dormant lists, flush existing occupants
        // through r-1 (their span content is valid only up to the newcomer).
        for &a in &woken {
            let v = self.agents[a as usize].node;
            self.sync_node(v, r.saturating_sub(1));
        }
        for &a in &woken {
            let rt = &mut self.agents[a as usize];
            rt.awake = true;
            rt.wake_round = Some(r);
            // Trace coverage starts at this round's step record; wrapping at
            // r=0 yields u64::MAX, which sync_agent treats as "nothing
            // pending" until the first invocation resets it.
            rt.last_invoked = r.wrapping_sub(1);
            let v = rt.node;
            self.nodes[v].dormant.retain(|&x| x != a);
            self.trace.push(TraceEvent::Wake { round: r, agent: a, node: v as u32 });
        }

        // Phase B: build the invoke set — agents due by their interesting
        // round, agents at dirty nodes, the newly woken.
        let mut invoke: Vec<u32> = Vec::new();
        let push_invoke = |stamp: &mut Vec<u64>, invoke: &mut Vec<u32>, a: u32| {
            if stamp[a as usize] != r {
                stamp[a as usize] = r;
                invoke.push(a);
            }
        };
        if self.cfg.compressed {
            while let Some(&Reverse((t, a))) = self.heap.peek() {
                if t > r {
                    break;
                }
                self.heap.pop();
                let rt = &self.agents[a as usize];
                if rt.awake && !rt.retired && rt.niv == t {
                    push_invoke(&mut self.agent_stamp, &mut invoke, a);
                }
            }
            for &v in &dirty_nodes {
                for &(_, a) in &self.nodes[v].order {
                    if !self.agents[a as usize].retired {
                        push_invoke(&mut self.agent_stamp, &mut invoke, a);
                    }
                }
            }
            for &a in &woken {
                push_invoke(&mut self.agent_stamp, &mut invoke, a);
            }
        } else {
            for (a, rt) in self.agents.iter().enumerate() {
                if rt.awake && !rt.retired {
                    push_invoke(&mut self.agent_stamp, &mut invoke, a as u32);
                }
            }
            for &a in &woken {
                push_invoke(&mut self.agent_stamp, &mut invoke, a);
            }
        }
        invoke.sort_unstable();

        // Phase C: announcements. Fresh announcements are needed for agents
        // whose own history advanced: due agents (niv <= r), movers (pending
        // entry port), the just-woken — and everyone when uncompressed.
        let mut ann_updates: Vec<(u32, Announcement)> = Vec::new();
        for &a in &invoke {
            let rt = &self.agents[a as usize];
            let fresh = !self.cfg.compressed
                || rt.niv <= r
                || rt.entry_port.is_some()
                || rt.wake_round == Some(r);
            if !fresh {
                continue;
            }
            // The announcement must reflect the agent's own history through
            // r-1, so flush any pending frozen span before asking.
            if r > 0 {
                self.sync_agent(a as usize, r - 1);
            }
            let rt = &self.agents[a as usize];
            let ctx = RoundCtx {
                round: r,
                degree: self.inst.graph.degree(rt.node),
                entry_port: rt.entry_port,
            };
            let ann = self.behaviors[a as usize].announce(&ctx);
            let rt = &self.agents[a as usize];
            if rt.wake_round == Some(r) || ann != rt.ann {
                ann_updates.push((a, ann));
            }
        }
        if self.cfg.compressed && self.cfg.audit_frozen {
            // Contract audit: frozen agents must re-announce identically.
            for (a, rt) in self.agents.iter().enumerate() {
                if !rt.awake || rt.retired || self.agent_stamp[a] == r {
                    continue;
                }
                let ctx = RoundCtx {
                    round: r,
                    degree: self.inst.graph.degree(rt.node),
                    entry_port: None,
                };
                let ann = self.behaviors[a].announce(&ctx);
                if ann != self.agents[a].ann {
                    self.fault = Some(RunOutcome::CompressionViolation { agent: a as u32, round: r });
                    return RoundVerdict::Fault;
                }
            }
        }
        // Nodes whose observation content changes now: flush all frozen
        // occupants through r-1 before rewriting, and invoke them.
        let mut obs_dirty: Vec<usize> = Vec::new();
        for &(a, _) in &ann_updates {
            let v = self.agents[a as usize].node;
            if self.node_stamp[v] != r {
                self.node_stamp[v] = r;
                dirty_nodes.push(v);
                obs_dirty.push(v);
            }
        }
        for v in obs_dirty {
            self.sync_node(v, r - 1);
            for &(_, a) in &self.nodes[v].order {
                if !self.agents[a as usize].retired {
                    push_invoke(&mut self.agent_stamp, &mut invoke, a);
                }
            }
        }
        invoke.sort_unstable();
        invoke.dedup();
        // Commit announcement rewrites and wake insertions.
        for (a, ann) in ann_updates {
            let rt = &mut self.agents[a as usize];
            let digest = announcement_digest(&ann);
            if rt.wake_round == Some(r) {
                rt.ann = ann.clone();
                rt.ann_digest = digest;
                let (v, label) = (rt.node, ann.claimed_label);
                self.nodes[v].insert(label, a, ann);
            } else {
                let old_label = rt.ann.claimed_label;
                rt.ann = ann.clone();
                rt.ann_digest = digest;
                let v = rt.node;
                self.nodes[v].update_ann(old_label, a, ann);
            }
        }

        // Phase D: observations and actions for every invoked agent.
        let mut movers: Vec<(u32, u16)> = Vec::new();
        let mut retiring: Vec<(u32, bool)> = Vec::new(); // (agent, declared)
        for &a in &invoke {
            let ai = a as usize;
            if r > 0 {
                self.sync_agent(ai, r - 1);
            }
            let rt = &self.agents[ai];
            if rt.retired {
                continue;
            }
            let v = rt.node;
            let degree = self.inst.graph.degree(v);
            let entry_port = rt.entry_port;
            let obs = Observation { round: r, degree, entry_port, co_located: &self.nodes[v].anns };
            let action = self.behaviors[ai].act(&obs);
            let niv_raw = self.behaviors[ai].next_interesting_round();
            let status = self.behaviors[ai].status();
            if let Action::Move(p) = action {
                if p >= degree {
                    self.fault = Some(RunOutcome::ProtocolFault {
                        agent: a,
                        round: r,
                        detail: format!("move through port {p} at a node of degree {degree}"),
                    });
                    // Record the faulty step before aborting.
                    self.record_step(ai, r, action);
                    return RoundVerdict::Fault;
                }
            }
            self.record_step(ai, r, action);
            let rt = &mut self.agents[ai];
            rt.entry_port = None;
            rt.action = action;
            rt.last_invoked = r;
            rt.niv = if action == Action::Wait && status == BehaviorStatus::Active {
                niv_raw.max(r + 1)
            } else {
                r + 1
            };
            if rt.niv != NO_ROUND {
                self.heap.push(Reverse((rt.niv, a)));
            }
            match (action, status) {
                (Action::Declare, _) => retiring.push((a, true)),
                (_, BehaviorStatus::CompletedWithoutDeclare) => retiring.push((a, false)),
                (Action::Move(p), _) => movers.push((a, p)),
                _ => {}
            }
        }

        // Phase E: apply retirements and moves at the round boundary. Frozen
        // co-occupants observe the old content through round r, so flush them
        // first.
        for &(a, _) in &retiring {
            let v = self.agents[a as usize].node;
            self.sync_node(v, r);
        }
        for &(a, p) in &movers {
            let v = self.agents[a as usize].node;
            let (u, _) = self.inst.graph.traverse(v, p);
            self.sync_node(v, r);
            self.sync_node(u, r);
        }
        for (a, declared) in retiring {
            let ai = a as usize;
            let rt = &mut self.agents[ai];
            rt.retired = true;
            let (v, label) = (rt.node, rt.ann.claimed_label);
            rt.termination = if declared {
                Termination::Declared { round: r, node: v as u32 }
            } else {
                Termination::Completed { round: r, node: v as u32 }
            };
            self.nodes[v].remove(label, a);
            if !rt.byzantine {
                self.good_active -= 1;
            }
            self.mark_affected(v, r + 1);
        }
        for (a, p) in movers {
            let ai = a as usize;
            if self.agents[ai].retired {
                continue;
            }
            let v = self.agents[ai].node;
            let (u, q) = self.inst.graph.traverse(v, p);
            let label = self.agents[ai].ann.claimed_label;
            let ann = self.agents[ai].ann.clone();
            self.nodes[v].remove(label, a);
            self.nodes[u].insert(label, a, ann);
            let rt = &mut self.agents[ai];
            rt.node = u;
            rt.entry_port = Some(q);
            self.mark_affected(v, r + 1);
            self.mark_affected(u, r + 1);
        }
        if self.good_active == 0 {
            return RoundVerdict::AllGoodRetired;
        }
        RoundVerdict::Continue
    }

    fn record_step(&mut self, a: usize, r: u64, action: Action) {
        let rt = &self.agents[a];
        self.trace.push(TraceEvent::Step {
            round: r,
            agent: a as u32,
            node: rt.node as u32,
            state: rt.ann.claimed_state.clone(),
            action,
            ann_digest: rt.ann_digest,
        });
        if let Some((s, log)) = &mut self.subject {
            if *s == a {
                let v = rt.node;
                log.entries.push(SubjectEntry {
                    start_round: r,
                    count: 1,
                    entry_port: rt.entry_port,
                    degree: self.inst.graph.degree(v),
                    announcement: rt.ann.clone(),
                    co_located: self.nodes[v].anns.clone().into(),
                    action,
                });
            }
        }
    }
}

enum RoundVerdict {
    Continue,
    AllGoodRetired,
    Fault,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::ScriptSpec;
    use crate::behavior::{RoundCtx, StateTag, NEVER};
    use crate::graph::{make_oriented_ring, AgentSpec, Instance, SCHEMA_VERSION};
    use std::collections::BTreeMap;

    /// Waits until a fixed round, then declares.
    struct DeclareAt {
        label: u64,
        at: u64,
    }

    impl Behavior for DeclareAt {
        fn announce(&mut self, _ctx: &RoundCtx) -> Announcement {
            Announcement::new(self.label, StateTag::Idle)
        }

        fn act(&mut self, obs: &Observation<'_>) -> Action {
            if obs.round >= self.at {
                Action::Declare
            } else {
                Action::Wait
            }
        }

        fn next_interesting_round(&self) -> u64 {
            self.at
        }

        fn skip(&mut self, _reps: u64, _obs: &Observation<'_>) {}
    }

    /// Declares as soon as it sees `need` agents at its node; otherwise moves
    /// through `port` every `period` rounds.
    struct Walker {
        label: u64,
        period: u64,
        port: u16,
        need: usize,
        niv: u64,
    }

    impl Walker {
        fn new(label: u64, period: u64, port: u16, need: usize) -> Self {
            Walker { label, period, port, need, niv: 0 }
        }
    }

    impl Behavior for Walker {
        fn announce(&mut self, _ctx: &RoundCtx) -> Announcement {
            Announcement::new(self.label, StateTag::Idle)
        }

        fn act(&mut self, obs: &Observation<'_>) -> Action {
            self.niv = (obs.round / self.period + 1) * self.period;
            if obs.agent_count() >= self.need {
                Action::Declare
            } else if obs.round % self.period == 0 {
                Action::Move(self.port % obs.degree)
            } else {
                Action::Wait
            }
        }

        fn next_interesting_round(&self) -> u64 {
            self.niv
        }

        fn skip(&mut self, _reps: u64, _obs: &Observation<'_>) {}
    }

    /// Purely reactive: declares on company, otherwise nothing ever.
    struct DeclareOnCompany {
        label: u64,
        need: usize,
    }

    impl Behavior for DeclareOnCompany {
        fn announce(&mut self, _ctx: &RoundCtx) -> Announcement {
            Announcement::new(self.label, StateTag::Idle)
        }

        fn act(&mut self, obs: &Observation<'_>) -> Action {
            if obs.agent_count() >= self.need {
                Action::Declare
            } else {
                Action::Wait
            }
        }

        fn next_interesting_round(&self) -> u64 {
            NEVER
        }

        fn skip(&mut self, _reps: u64, _obs: &Observation<'_>) {}
    }

    fn ring_instance(n: usize, agents: Vec<AgentSpec>, wakes: &[(usize, u64)]) -> Instance {
        Instance {
            schema_version: SCHEMA_VERSION,
            graph: make_oriented_ring(n).unwrap(),
            agents,
            wake_schedule: wakes.iter().copied().collect::<BTreeMap<_, _>>(),
            gk: 1,
            size_bound: n,
        }
    }

    fn good(label: u64, start_node: usize) -> AgentSpec {
        AgentSpec { label, start_node, byzantine: false, script: None }
    }

    #[test]
    fn single_agent_declares_immediately() {
        let inst = ring_instance(4, vec![good(1, 2)], &[(0, 0)]);
        let behaviors: Vec<Box<dyn Behavior>> = vec![Box::new(DeclareAt { label: 1, at: 0 })];
        let res = run(&inst, behaviors, &RunConfig::compressed(100)).unwrap();
        assert_eq!(res.summary.outcome, RunOutcome::GoodAgentsTerminated);
        assert_eq!(res.summary.common_declare(), Some((0, 2)));
        assert_eq!(res.summary.final_round, 0);
    }

    #[test]
    fn freezing_skips_quiet_spans() {
        let at = 1_000_000;
        let inst = ring_instance(4, vec![good(1, 0)], &[(0, 0)]);
        let behaviors: Vec<Box<dyn Behavior>> = vec![Box::new(DeclareAt { label: 1, at })];
        let res = run(&inst, behaviors, &RunConfig::compressed(2 * at)).unwrap();
        assert_eq!(res.summary.outcome, RunOutcome::GoodAgentsTerminated);
        assert_eq!(res.summary.final_round, at);
        assert!(
            res.summary.executed_rounds <= 4,
            "expected a clock jump, executed {} rounds",
            res.summary.executed_rounds
        );
        assert_eq!(res.summary.skipped_agent_rounds, at - 1);
    }

    #[test]
    fn delayed_wake_is_respected() {
        let inst = ring_instance(4, vec![good(1, 0)], &[(0, 17)]);
        let behaviors: Vec<Box<dyn Behavior>> = vec![Box::new(DeclareAt { label: 1, at: 0 })];
        let res = run(&inst, behaviors, &RunConfig::compressed(100).with_full_trace()).unwrap();
        assert_eq!(res.summary.agents[0].wake_round, Some(17));
        // "Declare at round >= 0" fires on the wake round itself.
        assert_eq!(res.summary.common_declare(), Some((17, 0)));
        assert_eq!(res.trace.wake_events(), vec![(17, 0, 0)]);
    }

    #[test]
    fn co_location_wakes_dormant_agents() {
        // Agent 0 walks the ring; agent 1 is dormant two hops away and has no
        // scheduled wake. The walker reaches it and wakes it; both then see
        // two agents and declare together.
        let inst = ring_instance(4, vec![good(1, 0), good(2, 2)], &[(0, 0)]);
        let behaviors: Vec<Box<dyn Behavior>> = vec![
            Box::new(Walker::new(1, 3, 0, 2)),
            Box::new(DeclareOnCompany { label: 2, need: 2 }),
        ];
        let res = run(&inst, behaviors, &RunConfig::compressed(100).with_full_trace()).unwrap();
        assert_eq!(res.summary.outcome, RunOutcome::GoodAgentsTerminated);
        // Moves at rounds 0 and 3: at node 2 from round 4 on.
        assert_eq!(res.trace.wake_events(), vec![(0, 0, 0), (4, 1, 2)]);
        assert_eq!(res.summary.common_declare(), Some((4, 2)));
    }

    #[test]
    fn horizon_exhaustion_reported() {
        let inst = ring_instance(4, vec![good(1, 0)], &[(0, 0)]);
        let behaviors: Vec<Box<dyn Behavior>> = vec![Box::new(DeclareAt { label: 1, at: NEVER })];
        let res = run(&inst, behaviors, &RunConfig::compressed(50)).unwrap();
        assert_eq!(res.summary.outcome, RunOutcome::HorizonExhausted);
        assert_eq!(res.summary.final_round, 49);
        assert_eq!(res.summary.agents[0].termination, Termination::Active);
    }

    #[test]
    fn illegal_move_is_a_protocol_fault() {
        struct BadMove;
        impl Behavior for BadMove {
            fn announce(&mut self, _ctx: &RoundCtx) -> Announcement {
                Announcement::new(1, StateTag::Idle)
            }
            fn act(&mut self, _obs: &Observation<'_>) -> Action {
                Action::Move(9)
            }
            fn next_interesting_round(&self) -> u64 {
                0
            }
            fn skip(&mut self, _reps: u64, _obs: &Observation<'_>) {}
        }
        let inst = ring_instance(4, vec![good(1, 0)], &[(0, 0)]);
        let res = run(&inst, vec![Box::new(BadMove)], &RunConfig::compressed(10)).unwrap();
        assert!(matches!(
            res.summary.outcome,
            RunOutcome::ProtocolFault { agent: 0, round: 0, .. }
        ));
    }

    fn mixed_scenario() -> (Instance, Vec<Box<dyn Behavior>>) {
        let mut byz = AgentSpec {
            label: 9,
            start_node: 1,
            byzantine: true,
            script: Some(ScriptSpec::RandomWalk { seed: 7 }),
        };
        let spec = byz.script.take().unwrap();
        byz.script = Some(spec.clone());
        let inst = ring_instance(
            5,
            vec![good(1, 0), good(2, 2), good(3, 4), byz],
            &[(0, 0), (1, 2)],
        );
        let behaviors: Vec<Box<dyn Behavior>> = vec![
            Box::new(Walker::new(1, 3, 0, 3)),
            Box::new(DeclareOnCompany { label: 2, need: 3 }),
            Box::new(DeclareOnCompany { label: 3, need: 3 }),
            crate::adversary::builtin_script(&spec, 9),
        ];
        (inst, behaviors)
    }

    fn mixed_behaviors() -> Vec<Box<dyn Behavior>> {
        mixed_scenario().1
    }

    #[test]
    fn compressed_and_uncompressed_traces_agree() {
        let (inst, b1) = mixed_scenario();
        let horizon = 300;
        let c = run(&inst, b1, &RunConfig::compressed(horizon).with_full_trace()).unwrap();
        let u = run(&inst, mixed_behaviors(), &RunConfig::uncompressed(horizon).with_full_trace())
            .unwrap();
        assert_eq!(c.summary.outcome, u.summary.outcome);
        assert_eq!(c.summary.final_round, u.summary.final_round);
        assert_eq!(c.summary.agents, u.summary.agents);
        assert_eq!(c.trace.wake_events(), u.trace.wake_events());
        let (ec, eu) = (c.trace.expanded_steps(), u.trace.expanded_steps());
        assert_eq!(ec.len(), eu.len(), "expanded round-record counts differ");
        for (a, b) in ec.iter().zip(&eu) {
            assert_eq!(a, b);
        }
        assert!(c.summary.executed_rounds <= u.summary.executed_rounds);
    }

    #[test]
    fn repeated_runs_share_a_digest() {
        let (inst, b1) = mixed_scenario();
        let r1 = run(&inst, b1, &RunConfig::compressed(300)).unwrap();
        let r2 = run(&inst, mixed_behaviors(), &RunConfig::compressed(300)).unwrap();
        assert_eq!(r1.summary.trace_digest, r2.summary.trace_digest);
        assert_eq!(r1.summary, r2.summary);
    }

    #[test]
    fn byzantine_agents_wake_at_round_zero_without_schedule() {
        let (inst, b1) = mixed_scenario();
        let res = run(&inst, b1, &RunConfig::compressed(50).with_full_trace()).unwrap();
        let wakes = res.trace.wake_events();
        assert!(wakes.contains(&(0, 3, 1)), "byzantine wake missing from {wakes:?}");
    }

    #[test]
    fn audit_mode_matches_plain_compressed_run() {
        let (inst, b1) = mixed_scenario();
        let mut cfg = RunConfig::compressed(300);
        cfg.audit_frozen = true;
        let audited = run(&inst, b1, &cfg).unwrap();
        let plain = run(&inst, mixed_behaviors(), &RunConfig::compressed(300)).unwrap();
        assert_eq!(audited.summary.outcome, plain.summary.outcome);
        assert_eq!(audited.summary.agents, plain.summary.agents);
    }

    #[test]
    fn subject_log_covers_every_round_once() {
        let (inst, b1) = mixed_scenario();
        let mut cfg = RunConfig::compressed(200);
        cfg.record_observations_for = Some(0);
        let res = run(&inst, b1, &cfg).unwrap();
        let log = res.subject_log.unwrap();
        let mut expected = 0;
        for e in &log.entries {
            assert_eq!(e.start_round, expected, "gap or overlap in subject log");
            expected = e.start_round + e.count;
        }
        // Coverage runs from the subject's wake to its own retirement (or the
        // end of the run if it stays active).
        let last = match res.summary.agents[0].termination {
            Termination::Declared { round, .. } | Termination::Completed { round, .. } => round,
            Termination::Active => res.summary.final_round,
        };
        assert_eq!(expected, last + 1);
        assert!(log.entries.iter().any(|e| e.count > 1), "expected at least one frozen span");
    }

    #[test]
    fn behavior_count_mismatch_is_rejected() {
        let inst = ring_instance(4, vec![good(1, 0)], &[(0, 0)]);
        let err = run(&inst, vec![], &RunConfig::compressed(10)).unwrap_err();
        assert!(matches!(err, EngineError::BehaviorCount { expected: 1, got: 0 }));
    }
}
