//! Byzantine scripts and wake-up policies.
//!
//! A Byzantine agent obeys physics but not protocol: its announcements are
//! unconstrained (it may forge labels, states, and payloads, and change them
//! every round), while its actions must still be legal waits or moves. Every
//! script here is deterministic — randomness enters only through explicit
//! seeds — so whole runs stay reproducible.
//!
//! Scripts are also written to be compression-friendly: between their active
//! rounds they present a constant announcement and a far-away
//! next-interesting-round, letting the engine freeze them over long quiet
//! spans.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::behavior::{
    Action, Announcement, Behavior, Observation, Payload, RoundCtx, StateTag, NEVER,
};

/// Serializable description of a builtin Byzantine script, embedded in
/// instance files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptSpec {
    /// Never moves, never claims a protocol state.
    Inert,
    /// Moves through seeded pseudo-random ports in bursts separated by
    /// exponentially growing (capped) idle gaps.
    RandomWalk { seed: u64 },
    /// Stationary; forges the given label with a follower-state claim,
    /// polluting searchers' maps.
    LabelForger { target_label: u64 },
    /// Claims the given protocol state (byte-exact name) for `duration`
    /// rounds after waking, then goes quiet; `duration = 0` means forever.
    StateMimic { state: String, duration: u64 },
    /// Permanently claims the Optimist state.
    OptimistSpoofer,
}

/// Instantiates a builtin script for an agent with the given (true) label.
pub fn builtin_script(spec: &ScriptSpec, own_label: u64) -> Box<dyn Behavior> {
    match spec {
        ScriptSpec::Inert => Box::new(FixedAnnouncement {
            ann: Announcement::new(own_label, StateTag::Idle),
        }),
        ScriptSpec::RandomWalk { seed } => Box::new(RandomWalkScript {
            label: own_label,
            seed: *seed,
            anchor: None,
            niv: NEVER,
        }),
        ScriptSpec::LabelForger { target_label } => Box::new(FixedAnnouncement {
            ann: Announcement::new(*target_label, StateTag::WaitForAttendees),
        }),
        ScriptSpec::StateMimic { state, duration } => {
            let tag = StateTag::from_name(state);
            let payload = match tag {
                StateTag::Checking => Payload::Check { omega: 3 },
                _ => Payload::None,
            };
            Box::new(StateMimicScript {
                ann: Announcement { claimed_label: own_label, claimed_state: tag, payload },
                idle: Announcement::new(own_label, StateTag::Idle),
                duration: *duration,
                anchor: None,
            })
        }
        ScriptSpec::OptimistSpoofer => Box::new(FixedAnnouncement {
            ann: Announcement::new(own_label, StateTag::Optimist),
        }),
    }
}

/// Stationary script with one constant announcement (inert, label forger,
/// optimist spoofer).
struct FixedAnnouncement {
    ann: Announcement,
}

impl Behavior for FixedAnnouncement {
    fn announce(&mut self, _ctx: &RoundCtx) -> Announcement {
        self.ann.clone()
    }

    fn act(&mut self, _obs: &Observation<'_>) -> Action {
        Action::Wait
    }

    fn next_interesting_round(&self) -> u64 {
        NEVER
    }

    fn skip(&mut self, _reps: u64, _obs: &Observation<'_>) {}
}

/// splitmix64 — the standard 64-bit finalizing mixer; used to derive
/// per-round pseudo-random decisions from a seed without carried RNG state
/// (which keeps the script trivially skippable).
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

const BURST_LEN: u64 = 4;
const GAP_CAP: u64 = 1 << 22;

struct RandomWalkScript {
    label: u64,
    seed: u64,
    /// Wake round, fixed at first invocation.
    anchor: Option<u64>,
    /// Absolute round of the next potential action change, set by `act`.
    niv: u64,
}

impl RandomWalkScript {
    /// Start round of burst `k` relative to the wake round: bursts of
    /// `BURST_LEN` moves separated by gaps `min(4 << k, GAP_CAP)`.
    fn burst_start(k: u64) -> u64 {
        let mut t = 1;
        for i in 0..k {
            t += BURST_LEN + (4u64 << i.min(62)).min(GAP_CAP);
        }
        t
    }

    /// (in_burst, next boundary round offset) at offset `t` from wake.
    fn phase(t: u64) -> (bool, u64) {
        // Bursts are sparse: walk them (the loop runs O(log t) times until
        // the gap cap, then O(t / GAP_CAP) — bounded by the horizon budget).
        let mut k = 0;
        loop {
            let s = Self::burst_start(k);
            if t < s {
                return (false, s);
            }
            if t < s + BURST_LEN {
                return (true, t + 1);
            }
            k += 1;
        }
    }
}

impl Behavior for RandomWalkScript {
    fn announce(&mut self, ctx: &RoundCtx) -> Announcement {
        self.anchor.get_or_insert(ctx.round);
        Announcement::new(self.label, StateTag::Idle)
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        let anchor = *self.anchor.get_or_insert(obs.round);
        let t = obs.round - anchor;
        let (moving, next_boundary) = Self::phase(t);
        self.niv = anchor.saturating_add(next_boundary);
        if moving && obs.degree > 0 {
            let port = (mix64(self.seed ^ obs.round) % obs.degree as u64) as u16;
            Action::Move(port)
        } else {
            Action::Wait
        }
    }

    fn next_interesting_round(&self) -> u64 {
        self.niv
    }

    fn skip(&mut self, _reps: u64, _obs: &Observation<'_>) {}
}

struct StateMimicScript {
    ann: Announcement,
    idle: Announcement,
    duration: u64,
    anchor: Option<u64>,
}

impl StateMimicScript {
    fn active_at(&self, round: u64) -> bool {
        match (self.anchor, self.duration) {
            (None, _) => true,
            (_, 0) => true,
            (Some(a), d) => round < a + d,
        }
    }
}

impl Behavior for StateMimicScript {
    fn announce(&mut self, ctx: &RoundCtx) -> Announcement {
        self.anchor.get_or_insert(ctx.round);
        if self.active_at(ctx.round) { self.ann.clone() } else { self.idle.clone() }
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        self.anchor.get_or_insert(obs.round);
        Action::Wait
    }

    fn next_interesting_round(&self) -> u64 {
        match (self.anchor, self.duration) {
            (Some(a), d) if d > 0 => a.saturating_add(d),
            _ => NEVER,
        }
    }

    fn skip(&mut self, _reps: u64, _obs: &Observation<'_>) {}
}

/// One run-length-encoded step of a [`PlaybackScript`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlayEntry {
    pub reps: u64,
    pub announcement: Announcement,
    pub action: Action,
}

/// Replays a precomputed announcement/action stream from the wake round on;
/// inert after exhaustion. This is the vehicle for the mirror adversary of
/// the fooling harness, whose shadow agents reproduce recorded co-location
/// patterns.
pub struct PlaybackScript {
    entries: Arc<[PlayEntry]>,
    after: Announcement,
    entry_idx: usize,
    used_in_entry: u64,
    /// Wake round, fixed at first invocation: stream position p plays at
    /// absolute round anchor + p.
    anchor: Option<u64>,
    /// Rounds consumed so far.
    consumed_total: u64,
}

impl PlaybackScript {
    pub fn new(entries: Vec<PlayEntry>, after: Announcement) -> Self {
        assert!(entries.iter().all(|e| e.reps > 0), "empty playback entries");
        PlaybackScript {
            entries: entries.into(),
            after,
            entry_idx: 0,
            used_in_entry: 0,
            anchor: None,
            consumed_total: 0,
        }
    }

    fn current(&self) -> Option<&PlayEntry> {
        self.entries.get(self.entry_idx)
    }

    fn consume(&mut self, mut rounds: u64) {
        while rounds > 0 {
            match self.entries.get(self.entry_idx) {
                None => return,
                Some(e) => {
                    let left = e.reps - self.used_in_entry;
                    let take = left.min(rounds);
                    self.used_in_entry += take;
                    self.consumed_total += take;
                    rounds -= take;
                    if self.used_in_entry == e.reps {
                        self.entry_idx += 1;
                        self.used_in_entry = 0;
                    }
                }
            }
        }
    }
}

impl Behavior for PlaybackScript {
    fn announce(&mut self, ctx: &RoundCtx) -> Announcement {
        self.anchor.get_or_insert(ctx.round);
        match self.current() {
            Some(e) => e.announcement.clone(),
            None => self.after.clone(),
        }
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        self.anchor.get_or_insert(obs.round);
        let action = self.current().map(|e| e.action).unwrap_or(Action::Wait);
        self.consume(1);
        action
    }

    fn next_interesting_round(&self) -> u64 {
        // Next stream position at which the record may change. Mid-entry that
        // is the entry's end; on an entry boundary (the upcoming entry has
        // not played yet) it is the very next round, since a fresh entry may
        // open with a different announcement or action.
        let anchor = match self.anchor {
            Some(a) => a,
            None => return NEVER,
        };
        match self.current() {
            None => NEVER,
            Some(e) => {
                let boundary = if self.used_in_entry == 0 {
                    self.consumed_total
                } else {
                    self.consumed_total + (e.reps - self.used_in_entry)
                };
                anchor.saturating_add(boundary)
            }
        }
    }

    fn skip(&mut self, reps: u64, _obs: &Observation<'_>) {
        self.consume(reps);
    }
}

/// Wake-round generators over the good agents of an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WakePolicy {
    /// Everyone at round 0.
    Simultaneous,
    /// The i-th good agent wakes at round `i * k`.
    Staggered(u64),
    /// One agent at round 0, all others at the given round (the adversary's
    /// "as late as possible" pattern).
    AdversarialLatest(u64),
}

impl WakePolicy {
    /// Builds a wake schedule for the given good-agent indices.
    pub fn schedule(&self, good_agents: &[usize]) -> BTreeMap<usize, u64> {
        let mut out = BTreeMap::new();
        for (i, &a) in good_agents.iter().enumerate() {
            let r = match self {
                WakePolicy::Simultaneous => 0,
                WakePolicy::Staggered(k) => i as u64 * k,
                WakePolicy::AdversarialLatest(l) => {
                    if i == 0 {
                        0
                    } else {
                        *l
                    }
                }
            };
            out.insert(a, r);
        }
        out
    }
}
