//! The MERGE procedure: census-based election and regrouping.
//!
//! MERGE(T, n) runs through three states. In **Census** (one round) the agent
//! snapshots the lexicographically ordered list `H` of distinct claimed
//! labels of co-located Census agents. In **Election** it runs five periods:
//! a first wait whose duration depends on whether its own label falls in the
//! first half of `H` (transmitting `H`), an exploration with backtrack that
//! looks for the largest census list `I` corroborated by at least ⌈|I|/4⌉
//! distinct transmitting agents (remembering the shortest traversal prefix
//! `π` that reaches such a node), a complementary second wait (again
//! transmitting `H`), a walk of the first `π` traversals, and a final wait.
//! Agents whose own list won (`H = I`) spend one round in
//! **Synchronisation** at the end; everyone else watches for a ⌈3|I|/4⌉
//! quorum of Synchronisation agents and exits the moment it appears (or when
//! the final wait expires).
//!
//! The two complementary wait durations interleave the halves of each census
//! group: while one half explores, the other half stays put and transmits,
//! so every explorer finds a corroborated list and the whole group exits at
//! one common round.

use std::cmp::Ordering;
use std::sync::Arc;

use crate::behavior::{Action, Behavior, Observation, Payload, StateTag};
use crate::explo::ExploSeq;
use crate::protocols::group::TimingOverflow;
use crate::protocols::walk::PathWalker;
use crate::protocols::{Standalone, SubBehavior};

/// The census list `H`: lexicographically ordered, pairwise distinct claimed
/// labels.
pub type CensusList = Arc<[u64]>;

/// Builds a census list from claimed labels (sorts and deduplicates).
pub fn census_list(labels: impl IntoIterator<Item = u64>) -> CensusList {
    let mut v: Vec<u64> = labels.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v.into()
}

/// The election order on census lists: more elements win; at equal
/// cardinality the lexicographically larger list wins.
pub fn compare_lists(a: &[u64], b: &[u64]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// Worst-case MERGE duration for wait parameter T and exploration time X:
/// `4T + 6X − 1` rounds.
pub fn merge_time_bound(t: u64, x: u64) -> Result<u64, TimingOverflow> {
    assert!(t >= 1 && x >= 2, "MERGE needs T >= 1, X >= 2");
    4u64.checked_mul(t)
        .and_then(|a| a.checked_add(6u64.checked_mul(x)?))
        .and_then(|a| a.checked_sub(1))
        .ok_or(TimingOverflow { t, n: 0, x })
}

/// Records, per transmitted census list, the shortest traversal prefix at
/// which it was seen corroborated.
#[derive(Debug, Default)]
struct Qualifiers {
    seen: Vec<(CensusList, u64)>,
}

impl Qualifiers {
    /// Scans one observation at exploration position `pos` (traversals done
    /// so far). A list qualifies when at least ⌈|L|/4⌉ distinct labels in
    /// state Election transmit it; empty lists carry no quorum and are
    /// ignored.
    fn scan(&mut self, obs: &Observation<'_>, pos: u64) {
        let mut tally: Vec<(&CensusList, Vec<u64>)> = Vec::new();
        for a in obs.iter() {
            if a.claimed_state != StateTag::Election {
                continue;
            }
            let Payload::Census(list) = &a.payload else { continue };
            if list.is_empty() {
                continue;
            }
            match tally.iter_mut().find(|(l, _)| l.as_ref() == list.as_ref()) {
                Some((_, labels)) => {
                    if !labels.contains(&a.claimed_label) {
                        labels.push(a.claimed_label);
                    }
                }
                None => tally.push((list, vec![a.claimed_label])),
            }
        }
        for (list, labels) in tally {
            let quorum = (list.len() as u64).div_ceil(4);
            if (labels.len() as u64) < quorum {
                continue;
            }
            match self.seen.iter_mut().find(|(l, _)| l.as_ref() == list.as_ref()) {
                Some((_, p)) => *p = (*p).min(pos),
                None => self.seen.push((list.clone(), pos)),
            }
        }
    }

    /// The winning list and its shortest prefix, if any list qualified.
    fn elect(self) -> Option<(CensusList, u64)> {
        self.seen
            .into_iter()
            .max_by(|(a, _), (b, _)| compare_lists(a, b))
    }
}

#[derive(Debug)]
enum MPhase {
    Census,
    /// First waiting period, transmitting `H`.
    Wait1 { left: u64 },
    /// Exploration plus backtrack (2X rounds), scanning for qualifiers.
    Move1 { walker: PathWalker, tick: u64, quals: Qualifiers },
    /// Second waiting period, transmitting `H`.
    Wait2 { left: u64 },
    /// The first π traversals toward the elected node.
    Move2 { walker: PathWalker },
    /// Third waiting period; `sync_after` iff `H = I`.
    Wait3 { left: u64, sync_after: bool },
    Synchro,
}

/// One agent's MERGE execution as a chainable sub-behavior.
pub(crate) struct MergeSub {
    t: u64,
    x: u64,
    terms: Arc<[u32]>,
    label: u64,
    h: CensusList,
    elected: CensusList,
    pi: u64,
    phase: MPhase,
    finished: bool,
    niv: u64,
}

impl MergeSub {
    pub fn new(t: u64, label: u64, seq: &ExploSeq, start: u64) -> Self {
        MergeSub {
            t,
            x: seq.x_n(),
            terms: seq.terms().into(),
            label,
            h: Arc::from([]),
            elected: Arc::from([]),
            pi: 0,
            phase: MPhase::Census,
            finished: false,
            niv: start,
        }
    }

    /// The two complementary wait durations, ordered (wait₁, wait₂).
    fn wait_pair(&self) -> (u64, u64) {
        let half = self.h.len() / 2;
        let first_half = self.h[..half].contains(&self.label);
        let (short, long) = (self.t - 1, self.t + 2 * self.x - 1);
        if first_half {
            (short, long)
        } else {
            (long, short)
        }
    }

    /// Enters the first moving period.
    fn start_move1(&self) -> MPhase {
        MPhase::Move1 {
            walker: PathWalker::full(self.terms.clone()),
            tick: 0,
            quals: Qualifiers::default(),
        }
    }

    /// Enters the second waiting period, chaining past it if it is empty.
    fn start_wait2(&mut self) -> MPhase {
        let (_, w2) = self.wait_pair();
        if w2 > 0 {
            MPhase::Wait2 { left: w2 }
        } else {
            self.start_move2()
        }
    }

    /// Enters the second moving period, chaining past it if π = 0.
    fn start_move2(&mut self) -> MPhase {
        if self.pi > 0 {
            MPhase::Move2 { walker: PathWalker::new(self.terms.clone(), self.pi) }
        } else {
            self.start_wait3()
        }
    }

    /// Enters the third waiting period (never empty: T + X − 1 ≥ X ≥ 2).
    fn start_wait3(&mut self) -> MPhase {
        let sync_after = self.h.as_ref() == self.elected.as_ref();
        let left = if sync_after { self.t + self.x - 1 } else { 2 * self.t + self.x - 1 };
        MPhase::Wait3 { left, sync_after }
    }

    /// Whether the wait₃ interruption quorum is present: at least ⌈3|I|/4⌉
    /// agents in state Synchronisation (meaningless while `I` is empty).
    fn sync_quorum(&self, obs: &Observation<'_>) -> bool {
        if self.elected.is_empty() {
            return false;
        }
        let quorum = (3 * self.elected.len() as u64).div_ceil(4);
        let count = obs.iter().filter(|a| a.claimed_state == StateTag::Synchronisation).count();
        count as u64 >= quorum
    }

    fn drive(&mut self, r: u64, obs: &Observation<'_>) -> Action {
        let (phase, action) = match std::mem::replace(&mut self.phase, MPhase::Census) {
            MPhase::Census => {
                self.h = census_list(
                    obs.iter()
                        .filter(|a| a.claimed_state == StateTag::Census)
                        .map(|a| a.claimed_label),
                );
                let (w1, _) = self.wait_pair();
                self.niv = r + 1 + w1;
                let next =
                    if w1 > 0 { MPhase::Wait1 { left: w1 } } else { self.start_move1() };
                (next, Action::Wait)
            }
            MPhase::Wait1 { mut left } => {
                left -= 1;
                if left == 0 {
                    self.niv = r + 1;
                    (self.start_move1(), Action::Wait)
                } else {
                    self.niv = r + left;
                    (MPhase::Wait1 { left }, Action::Wait)
                }
            }
            MPhase::Move1 { mut walker, mut tick, mut quals } => {
                walker.note_entry(obs.entry_port);
                let action = if tick < self.x {
                    // Forward phase: scan the node before moving on; the
                    // round at the farthest position is idle.
                    quals.scan(obs, walker.position() - 1);
                    walker.forward_move(obs.degree).unwrap_or(Action::Wait)
                } else {
                    walker.back_move().unwrap_or(Action::Wait)
                };
                tick += 1;
                self.niv = r + 1;
                if tick == 2 * self.x {
                    if let Some((list, pi)) = quals.elect() {
                        self.elected = list;
                        self.pi = pi;
                    }
                    (self.start_wait2(), action)
                } else {
                    (MPhase::Move1 { walker, tick, quals }, action)
                }
            }
            MPhase::Wait2 { mut left } => {
                left -= 1;
                if left == 0 {
                    self.niv = r + 1;
                    (self.start_move2(), Action::Wait)
                } else {
                    self.niv = r + left;
                    (MPhase::Wait2 { left }, Action::Wait)
                }
            }
            MPhase::Move2 { mut walker } => {
                walker.note_entry(obs.entry_port);
                let mv = walker.forward_move(obs.degree).expect("π traversals remain");
                self.niv = r + 1;
                if walker.forward_done() {
                    (self.start_wait3(), mv)
                } else {
                    (MPhase::Move2 { walker }, mv)
                }
            }
            MPhase::Wait3 { mut left, sync_after } => {
                if !sync_after && self.sync_quorum(obs) {
                    // Exit with the synchronising group, this very round.
                    self.finished = true;
                    self.niv = r + 1;
                    (MPhase::Wait3 { left, sync_after }, Action::Wait)
                } else {
                    left -= 1;
                    if left == 0 {
                        self.niv = r + 1;
                        if sync_after {
                            (MPhase::Synchro, Action::Wait)
                        } else {
                            self.finished = true;
                            (MPhase::Wait3 { left, sync_after }, Action::Wait)
                        }
                    } else {
                        self.niv = r + left;
                        (MPhase::Wait3 { left, sync_after }, Action::Wait)
                    }
                }
            }
            MPhase::Synchro => {
                self.finished = true;
                self.niv = r + 1;
                (MPhase::Synchro, Action::Wait)
            }
        };
        self.phase = phase;
        action
    }
}

impl SubBehavior for MergeSub {
    fn tag(&self) -> StateTag {
        match self.phase {
            MPhase::Census => StateTag::Census,
            MPhase::Synchro => StateTag::Synchronisation,
            _ => StateTag::Election,
        }
    }

    fn payload(&self) -> Payload {
        // The census list is transmitted during the two first waiting
        // periods only; everywhere else the state tag travels alone.
        match self.phase {
            MPhase::Wait1 { .. } | MPhase::Wait2 { .. } => Payload::Census(self.h.clone()),
            _ => Payload::None,
        }
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        debug_assert!(!self.finished, "driven past completion");
        let tag_before = self.tag();
        let payload_before = self.payload();
        let action = self.drive(obs.round, obs);
        if self.tag() != tag_before || self.payload() != payload_before {
            // A changed announcement must surface next round.
            self.niv = self.niv.min(obs.round + 1);
        }
        action
    }

    fn niv(&self) -> u64 {
        self.niv
    }

    fn skip(&mut self, reps: u64, _obs: &Observation<'_>) {
        // Only the waiting periods freeze; their interruption condition (in
        // wait₃) is a function of the observation alone, and a frozen span
        // has it constantly false.
        match &mut self.phase {
            MPhase::Wait1 { left } | MPhase::Wait2 { left } | MPhase::Wait3 { left, .. } => {
                debug_assert!(*left > reps, "a wait must end inside an executed round");
                *left -= reps;
            }
            _ => unreachable!("only waiting periods are frozen"),
        }
    }

    fn finished(&self) -> bool {
        self.finished
    }
}

/// A standalone MERGE behavior for one agent: starts at the agent's wake
/// round, runs the procedure to completion, then retires.
pub fn merge_behavior(
    label: u64,
    t: u64,
    seq: &ExploSeq,
) -> Result<Box<dyn Behavior>, TimingOverflow> {
    merge_time_bound(t, seq.x_n())?;
    let seq = seq.clone();
    Ok(Box::new(Standalone::new(label, move |start| MergeSub::new(t, label, &seq, start))))
}
