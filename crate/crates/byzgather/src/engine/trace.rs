//! Deterministic run traces, summaries, and digests.
//!
//! A trace is an append-only event log; a run's trace is a pure function of
//! the instance and the adversary scripts. The compressing engine emits
//! per-agent *flush* events describing spans of identical rounds instead of
//! repeating records; [`Trace::expanded_steps`] reconstructs the
//! round-by-round view, which must equal the uncompressed engine's output on
//! the same run (checked by the equivalence tests).

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::behavior::{Action, Announcement, Payload, StateTag};

/// 64-bit FNV-1a digest of an announcement's canonical byte encoding.
pub fn announcement_digest(a: &Announcement) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&a.claimed_label.to_le_bytes());
    eat(a.claimed_state.as_str().as_bytes());
    match &a.payload {
        Payload::None => eat(&[0]),
        Payload::Census(labels) => {
            eat(&[1]);
            eat(&(labels.len() as u64).to_le_bytes());
            for &l in labels.iter() {
                eat(&l.to_le_bytes());
            }
        }
        Payload::Check { omega } => {
            eat(&[2]);
            eat(&[*omega]);
            eat(crate::behavior::CHECK_GATHERING_WORD.as_bytes());
        }
    }
    h
}

/// One event of the log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    /// An agent was woken this round at this node.
    Wake { round: u64, agent: u32, node: u32 },
    /// An executed round of one agent.
    Step { round: u64, agent: u32, node: u32, state: StateTag, action: Action, ann_digest: u64 },
    /// `reps` rounds starting at `from_round` identical to the given record
    /// (action is always Wait in a frozen span).
    Flush { from_round: u64, reps: u64, agent: u32, node: u32, state: StateTag, ann_digest: u64 },
}

/// A fully-expanded per-round record (for equivalence checking).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct StepRecord {
    pub round: u64,
    pub agent: u32,
    pub node: u32,
    pub state: String,
    pub action: Action,
    pub ann_digest: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceMode {
    /// Keep every event in memory (small horizons only).
    Full,
    /// Hash events into the digest but do not store them.
    DigestOnly,
}

/// Append-only event log with an incrementally computed digest.
#[derive(Debug)]
pub struct Trace {
    mode: TraceMode,
    events: Vec<TraceEvent>,
    hasher: Sha256,
    digest: Option<[u8; 32]>,
}

impl Trace {
    pub fn new(mode: TraceMode) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"byzgather-trace-v1");
        Trace { mode, events: Vec::new(), hasher, digest: None }
    }

    pub fn mode(&self) -> TraceMode {
        self.mode
    }

    pub fn push(&mut self, ev: TraceEvent) {
        debug_assert!(self.digest.is_none(), "trace sealed");
        hash_event(&mut self.hasher, &ev);
        if self.mode == TraceMode::Full {
            self.events.push(ev);
        }
    }

    /// Seals the log and computes the digest; further pushes are a bug.
    pub fn seal(&mut self) -> [u8; 32] {
        if let Some(d) = self.digest {
            return d;
        }
        let d: [u8; 32] = self.hasher.clone().finalize().into();
        self.digest = Some(d);
        d
    }

    pub fn digest_hex(&mut self) -> String {
        self.seal().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Raw events (Full mode only).
    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    /// Expands flush spans into per-round records, sorted by (round, agent).
    /// Requires Full mode.
    pub fn expanded_steps(&self) -> Vec<StepRecord> {
        assert_eq!(self.mode, TraceMode::Full, "expansion needs a fully stored trace");
        let mut out = Vec::new();
        for ev in &self.events {
            match ev {
                TraceEvent::Step { round, agent, node, state, action, ann_digest } => {
                    out.push(StepRecord {
                        round: *round,
                        agent: *agent,
                        node: *node,
                        state: state.as_str().to_owned(),
                        action: *action,
                        ann_digest: *ann_digest,
                    });
                }
                TraceEvent::Flush { from_round, reps, agent, node, state, ann_digest } => {
                    for k in 0..*reps {
                        out.push(StepRecord {
                            round: from_round + k,
                            agent: *agent,
                            node: *node,
                            state: state.as_str().to_owned(),
                            action: Action::Wait,
                            ann_digest: *ann_digest,
                        });
                    }
                }
                TraceEvent::Wake { .. } => {}
            }
        }
        out.sort();
        out
    }

    /// Wake events in order (Full mode only).
    pub fn wake_events(&self) -> Vec<(u64, u32, u32)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Wake { round, agent, node } => Some((*round, *agent, *node)),
                _ => None,
            })
            .collect()
    }

    /// Writes the event log as line-delimited JSON records followed by a
    /// summary line (Full mode lists every event; DigestOnly only the
    /// summary).
    pub fn write_lines<W: std::io::Write>(&self, summary: &super::Summary, w: &mut W) -> std::io::Result<()> {
        for ev in &self.events {
            let line = match ev {
                TraceEvent::Wake { round, agent, node } => serde_json::json!({
                    "type": "wake", "round": round, "agent": agent, "node": node,
                }),
                TraceEvent::Step { round, agent, node, state, action, ann_digest } => serde_json::json!({
                    "type": "step", "round": round, "agent": agent, "node": node,
                    "state": state.as_str(), "action": action_json(action), "ann": format!("{ann_digest:016x}"),
                }),
                TraceEvent::Flush { from_round, reps, agent, node, state, ann_digest } => serde_json::json!({
                    "type": "span", "from": from_round, "reps": reps, "agent": agent, "node": node,
                    "state": state.as_str(), "ann": format!("{ann_digest:016x}"),
                }),
            };
            writeln!(w, "{line}")?;
        }
        writeln!(w, "{}", serde_json::json!({ "type": "summary", "summary": summary }))
    }
}

fn action_json(a: &Action) -> serde_json::Value {
    match a {
        Action::Wait => serde_json::json!("wait"),
        Action::Move(p) => serde_json::json!({ "move": p }),
        Action::Declare => serde_json::json!("declare"),
    }
}

fn hash_event(h: &mut Sha256, ev: &TraceEvent) {
    match ev {
        TraceEvent::Wake { round, agent, node } => {
            h.update([0u8]);
            h.update(round.to_le_bytes());
            h.update(agent.to_le_bytes());
            h.update(node.to_le_bytes());
        }
        TraceEvent::Step { round, agent, node, state, action, ann_digest } => {
            h.update([1u8]);
            h.update(round.to_le_bytes());
            h.update(agent.to_le_bytes());
            h.update(node.to_le_bytes());
            h.update(state.as_str().as_bytes());
            hash_action(h, action);
            h.update(ann_digest.to_le_bytes());
        }
        TraceEvent::Flush { from_round, reps, agent, node, state, ann_digest } => {
            h.update([2u8]);
            h.update(from_round.to_le_bytes());
            h.update(reps.to_le_bytes());
            h.update(agent.to_le_bytes());
            h.update(node.to_le_bytes());
            h.update(state.as_str().as_bytes());
            h.update(ann_digest.to_le_bytes());
        }
    }
}

fn hash_action(h: &mut Sha256, a: &Action) {
    match a {
        Action::Wait => h.update([0u8, 0, 0]),
        Action::Move(p) => {
            h.update([1u8]);
            h.update(p.to_le_bytes());
        }
        Action::Declare => h.update([2u8, 0, 0]),
    }
}

/// How one agent's run ended.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    Declared { round: u64, node: u32 },
    Completed { round: u64, node: u32 },
    Active,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgentSummary {
    pub label: u64,
    pub byzantine: bool,
    pub wake_round: Option<u64>,
    pub final_node: u32,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum RunOutcome {
    /// Every good agent retired (Declared or Completed).
    GoodAgentsTerminated,
    HorizonExhausted,
    ProtocolFault { agent: u32, round: u64, detail: String },
    CompressionViolation { agent: u32, round: u64 },
}
