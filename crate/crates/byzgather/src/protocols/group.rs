//! The GROUP procedure: invitation-based group formation.
//!
//! GROUP(T, n, bin) runs in two phases. In phase **Process**, agents repeat
//! `S = n²·T·X + 1` fixed-length steps of `5T + 5X + H` rounds each, acting
//! one of two roles given by `bin`: *followers* (bin = 0) invite searchers to
//! wait with them, and *searchers* (bin = 1) scout for waiting followers
//! using an imperfect map and camp on the most promising one. In phase
//! **Build-up**, each agent replays the exact prefix of its own action log up
//! to the round where it saw the largest meeting, so that agents that shared
//! their best meeting re-converge on that node at the same round.
//!
//! All waiting periods are anchored to absolute round numbers derived from
//! the procedure's start round, which lets the simulator freeze agents
//! through the long quiet spans; every condition that can cut a wait short
//! (a searcher leaving, a camped-on follower disappearing) is a function of
//! the current observation only, so reactive re-invocation on neighborhood
//! changes preserves exact semantics.

use std::sync::Arc;

use thiserror::Error;

use crate::behavior::{Action, Behavior, Observation, StateTag};
use crate::explo::{ExploSeq, ImperfectMap};
use crate::protocols::walk::{ImKind, ImRecorder, PathWalker};
use crate::protocols::{searcher_present, waiting_follower_with_label, Standalone, SubBehavior};

/// Timing constants would not fit in 64-bit round arithmetic.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("GROUP timing constants overflow u64 for T={t}, n={n}, X={x}")]
pub struct TimingOverflow {
    pub t: u64,
    pub n: u64,
    pub x: u64,
}

/// The derived timing constants of one GROUP execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupTiming {
    pub t: u64,
    pub n: u64,
    pub x: u64,
    /// Steps of phase Process: `n²·T·X + 1`.
    pub s: u64,
    /// The padding constant `H = (n+1)·[T + 4X + (X·n)(T·n + n)(2X + T)] + 3`.
    pub h: u64,
    /// Rounds per step: `5T + 5X + H`.
    pub step_len: u64,
    /// Rounds of phase Process: `S · step_len`.
    pub process_len: u64,
}

impl GroupTiming {
    pub fn new(t: u64, n: u64, x: u64) -> Result<Self, TimingOverflow> {
        assert!(t >= 1 && n >= 2 && x >= 2, "GROUP needs T >= 1, n >= 2, X >= 2");
        let overflow = TimingOverflow { t, n, x };
        let checked = || -> Option<(u64, u64, u64, u64)> {
            let s = n.checked_mul(n)?.checked_mul(t)?.checked_mul(x)?.checked_add(1)?;
            let inner = t
                .checked_add(4u64.checked_mul(x)?)?
                .checked_add(
                    x.checked_mul(n)?
                        .checked_mul(t.checked_mul(n)?.checked_add(n)?)?
                        .checked_mul(2u64.checked_mul(x)?.checked_add(t)?)?,
                )?;
            let h = n.checked_add(1)?.checked_mul(inner)?.checked_add(3)?;
            let step_len = 5u64
                .checked_mul(t)?
                .checked_add(5u64.checked_mul(x)?)?
                .checked_add(h)?;
            let process_len = s.checked_mul(step_len)?;
            // The worst-case total (Process plus replay) must fit as well.
            process_len.checked_mul(2)?;
            Some((s, h, step_len, process_len))
        };
        let (s, h, step_len, process_len) = checked().ok_or(overflow)?;
        Ok(GroupTiming { t, n, x, s, h, step_len, process_len })
    }

    /// Duration of the `Invite` wait: `2T + 3X`.
    fn invite_len(&self) -> u64 {
        2 * self.t + 3 * self.x
    }

    /// Duration of the `Wait-for-attendees` wait (and of the searcher's
    /// camping window): `2T + X + H`.
    fn wfa_len(&self) -> u64 {
        2 * self.t + self.x + self.h
    }

    /// Worst-case total duration of GROUP: phase Process plus a replay of at
    /// most one round less than Process, i.e. `2 · S · step_len`.
    pub fn time_bound(&self) -> u64 {
        2 * self.process_len
    }
}

/// Worst-case GROUP duration for parameters (T, n) with exploration time X.
pub fn group_time_bound(t: u64, n: u64, x: u64) -> Result<u64, TimingOverflow> {
    Ok(GroupTiming::new(t, n, x)?.time_bound())
}

/// Sub-state of the follower's `Search-for-a-group` camping loop.
#[derive(Debug)]
enum Camp {
    /// Initial T-round wait; the map construction starts at `until`.
    PreWait { until: u64 },
    /// The imperfect-map construction (2X rounds).
    Im(ImRecorder),
    /// At the start node with the finished map, deciding what to do.
    Home,
    /// Walking the first i−1 exploration traversals toward the candidate.
    Walk { i: u64, min: u64, walker: PathWalker },
    /// Camping at the candidate node while the minimum-labeled waiting
    /// follower stays present.
    AtU { i: u64, min: u64, walker: PathWalker },
    /// Returning to the start node after a failed camp.
    Back { walker: PathWalker },
    /// The map ran out of candidates; idle until the deadline.
    IdleTillD,
    /// Deadline interrupt: unwinding the outstanding traversals.
    FinalBack { walker: PathWalker },
}

impl Camp {
    /// Feeds the round's entry port to whichever walker is pending an
    /// arrival. The map recorder feeds its own walker inside `round`.
    fn note_entry(&mut self, entry_port: Option<u16>) {
        match self {
            Camp::Walk { walker, .. }
            | Camp::AtU { walker, .. }
            | Camp::Back { walker }
            | Camp::FinalBack { walker } => walker.note_entry(entry_port),
            Camp::Im(rec) => rec.note_entry(entry_port),
            _ => {}
        }
    }

    /// Net outstanding traversals, the map construction walk included: a
    /// deadline interrupt must be able to unwind a search stranded anywhere.
    fn depth(&self) -> u64 {
        match self {
            Camp::Walk { walker, .. }
            | Camp::AtU { walker, .. }
            | Camp::Back { walker }
            | Camp::FinalBack { walker } => walker.depth(),
            Camp::Im(rec) => rec.depth(),
            _ => 0,
        }
    }
}

/// The searcher's `Accept-an-invitation` progress.
#[derive(Debug)]
struct AcceptState {
    /// Index of the map and smallest label of its list.
    j: u64,
    ell: u64,
    walker: PathWalker,
    /// Round of arrival at the candidate node (entry + j − 1).
    t_arrive: u64,
    /// Last round of the presence window `{t+1, …, t + 2T + X + H}`.
    window_last: u64,
    backtracking: bool,
}

#[derive(Debug)]
enum Phase {
    // Follower states.
    Invite,
    Wfa { start: u64 },
    Sfg { deadline: u64, camp: Camp },
    // Searcher states.
    Sfi,
    SfiIm(ImRecorder),
    Accept(AcceptState),
    // Shared states.
    FollowUp,
    Restart { target: u64, consumed: u64, entry: usize, within: u64 },
}

/// GROUP as a drivable sub-behavior (see the module docs for the protocol).
pub(crate) struct GroupSub {
    tm: GroupTiming,
    /// Role bit: 0 follower, 1 searcher.
    bin: u8,
    terms: Arc<[u32]>,
    /// Graph-size bound, used for the imperfect maps.
    bound: usize,
    start: u64,
    step: u64,
    step_start: u64,
    phase: Phase,
    /// The follower's per-step map P.
    p: Option<ImperfectMap>,
    /// The searcher's map Z, built in step 1 and only ever pruned.
    z: Option<ImperfectMap>,
    /// Run-length encoded action log of phase Process (for the replay).
    log: Vec<(Action, u64)>,
    /// Best meeting seen during Process: count of co-located non-Restart
    /// claimants, and the round offset (ties keep the largest offset).
    best_count: usize,
    best_off: u64,
    buildup: bool,
    finished: bool,
    niv: u64,
}

impl GroupSub {
    pub fn new(tm: GroupTiming, bin: u8, seq: &ExploSeq, start: u64) -> Self {
        assert!(bin <= 1, "bin must be 0 (follower) or 1 (searcher)");
        assert_eq!(seq.x_n(), tm.x, "exploration sequence does not match the timing constants");
        GroupSub {
            tm,
            bin,
            terms: seq.terms().into(),
            bound: seq.bound(),
            start,
            step: 1,
            step_start: start,
            phase: if bin == 0 { Phase::Invite } else { Phase::Sfi },
            p: None,
            z: None,
            log: Vec::new(),
            best_count: 0,
            best_off: 0,
            buildup: false,
            finished: false,
            niv: start,
        }
    }

    fn push_log(&mut self, action: Action, reps: u64) {
        match self.log.last_mut() {
            Some((a, n)) if *a == action => *n += reps,
            _ => self.log.push((action, reps)),
        }
    }

    fn note_meeting(&mut self, obs: &Observation<'_>) {
        let count = obs.iter().filter(|a| a.claimed_state != StateTag::Restart).count();
        if count >= self.best_count {
            self.best_count = count;
            self.best_off = obs.round - self.start;
        }
    }

    fn im_kind(&self) -> ImKind {
        if self.bin == 0 {
            // IM(1, n): followers look for agents already waiting.
            ImKind::WaitingFollower
        } else {
            // IM(0, n): searchers record anyone claiming follower status.
            ImKind::AnyFollower
        }
    }

    /// Handles a round of `Follow-up`: idle until the step boundary, then
    /// start the next step or enter Build-up.
    fn follow_up(&mut self, r: u64) -> (Phase, Action) {
        let last = self.step_start + self.tm.step_len - 1;
        debug_assert!(r <= last, "Follow-up past its own step");
        if r < last {
            self.niv = last;
            return (Phase::FollowUp, Action::Wait);
        }
        self.niv = r + 1;
        if self.step < self.tm.s {
            self.step += 1;
            self.step_start += self.tm.step_len;
            self.p = None;
            let next = if self.bin == 0 { Phase::Invite } else { Phase::Sfi };
            return (next, Action::Wait);
        }
        // End of phase Process: replay the prefix up to the best meeting.
        debug_assert_eq!(r, self.start + self.tm.process_len - 1);
        let target = self.best_off;
        if target == 0 {
            self.finished = true;
            (Phase::FollowUp, Action::Wait)
        } else {
            self.buildup = true;
            (Phase::Restart { target, consumed: 0, entry: 0, within: 0 }, Action::Wait)
        }
    }

    /// Decides what the follower does upon finding itself at its start node
    /// with counter w = 0 (after the map construction or a backtrack).
    fn camp_home(&mut self, r: u64, obs: &Observation<'_>, deadline: u64) -> (Camp, Action) {
        let useful = self.p.as_ref().is_some_and(|m| m.is_useful());
        if !useful {
            self.niv = deadline;
            return (Camp::IdleTillD, Action::Wait);
        }
        let map = self.p.as_ref().expect("useful implies present");
        let i = map.index().expect("useful map has an index") as u64;
        let min = map.min_of_list(i as usize).expect("indexed list is non-empty");
        let mut walker = PathWalker::new(self.terms.clone(), i - 1);
        if i == 1 {
            // The candidate node is the start node itself: camp right away.
            self.camp_check(r, obs, deadline, i, min, walker)
        } else {
            let mv = walker.forward_move(obs.degree).expect("walk of i-1 >= 1 traversals");
            self.niv = r + 1;
            (Camp::Walk { i, min, walker }, mv)
        }
    }

    /// One camping round at the candidate node: stay while the promised
    /// waiting follower is present, otherwise prune the map and head home.
    fn camp_check(
        &mut self,
        r: u64,
        obs: &Observation<'_>,
        deadline: u64,
        i: u64,
        min: u64,
        mut walker: PathWalker,
    ) -> (Camp, Action) {
        if waiting_follower_with_label(obs, min) {
            self.niv = deadline;
            return (Camp::AtU { i, min, walker }, Action::Wait);
        }
        self.p.as_mut().expect("camping requires a map").remove(i as usize, min);
        self.niv = r + 1;
        match walker.back_move() {
            Some(mv) => (Camp::Back { walker }, mv),
            // Camped at the start node: re-evaluate next round.
            None => (Camp::Home, Action::Wait),
        }
    }

    fn sfg_round(&mut self, r: u64, obs: &Observation<'_>, deadline: u64, mut camp: Camp) -> (Phase, Action) {
        camp.note_entry(obs.entry_port);
        if r >= deadline {
            // Deadline interrupt: unwind outstanding traversals, if any,
            // then transit to Follow-up.
            if camp.depth() == 0 {
                return self.follow_up(r);
            }
            let mut walker = match camp {
                Camp::Walk { walker, .. }
                | Camp::AtU { walker, .. }
                | Camp::Back { walker }
                | Camp::FinalBack { walker } => walker,
                Camp::Im(rec) => rec.into_walker(),
                _ => unreachable!("positive depth implies a walker"),
            };
            let mv = walker.back_move().expect("positive depth has moves to unwind");
            self.niv = r + 1;
            return (Phase::Sfg { deadline, camp: Camp::FinalBack { walker } }, mv);
        }
        let (camp, action) = match camp {
            Camp::PreWait { until } if r < until => {
                // A shortened deadline (premature Wfa stop) can precede the
                // pre-wait's end; the interrupt check above must still fire.
                self.niv = until.min(deadline);
                (Camp::PreWait { until }, Action::Wait)
            }
            Camp::PreWait { .. } => {
                let mut rec = ImRecorder::new(self.im_kind(), self.terms.clone(), self.bound);
                let a = rec.round(obs);
                self.niv = r + 1;
                (Camp::Im(rec), a)
            }
            Camp::Im(mut rec) => {
                let a = rec.round(obs);
                self.niv = r + 1;
                if rec.done() {
                    self.p = Some(rec.into_map());
                    (Camp::Home, a)
                } else {
                    (Camp::Im(rec), a)
                }
            }
            Camp::Home => self.camp_home(r, obs, deadline),
            Camp::Walk { i, min, mut walker } => {
                if let Some(mv) = walker.forward_move(obs.degree) {
                    self.niv = r + 1;
                    (Camp::Walk { i, min, walker }, mv)
                } else {
                    // Arrived at the candidate node this round.
                    self.camp_check(r, obs, deadline, i, min, walker)
                }
            }
            Camp::AtU { i, min, walker } => self.camp_check(r, obs, deadline, i, min, walker),
            Camp::Back { mut walker } => {
                self.niv = r + 1;
                match walker.back_move() {
                    Some(mv) => (Camp::Back { walker }, mv),
                    None => self.camp_home(r, obs, deadline),
                }
            }
            Camp::IdleTillD => {
                self.niv = deadline;
                (Camp::IdleTillD, Action::Wait)
            }
            Camp::FinalBack { .. } => unreachable!("final backtrack only runs past the deadline"),
        };
        (Phase::Sfg { deadline, camp }, action)
    }

    /// The searcher's end-of-scouting decision: camp if the map still has a
    /// candidate, otherwise sit the step out.
    fn accept_or_follow_up(&mut self, r: u64) -> Phase {
        self.niv = r + 1;
        match &self.z {
            Some(z) if z.is_useful() => {
                let j = z.index().expect("useful map has an index") as u64;
                let ell = z.min_of_list(j as usize).expect("indexed list is non-empty");
                let entry = r + 1;
                let t_arrive = entry + j - 1;
                Phase::Accept(AcceptState {
                    j,
                    ell,
                    walker: PathWalker::new(self.terms.clone(), j - 1),
                    t_arrive,
                    window_last: t_arrive + self.tm.wfa_len(),
                    backtracking: false,
                })
            }
            _ => Phase::FollowUp,
        }
    }

    fn accept_round(&mut self, r: u64, obs: &Observation<'_>, mut st: AcceptState) -> (Phase, Action) {
        st.walker.note_entry(obs.entry_port);
        if st.backtracking {
            self.niv = r + 1;
            return match st.walker.back_move() {
                Some(mv) => (Phase::Accept(st), mv),
                None => self.follow_up(r),
            };
        }
        if let Some(mv) = st.walker.forward_move(obs.degree) {
            self.niv = r + 1;
            return (Phase::Accept(st), mv);
        }
        if r <= st.t_arrive {
            // Arrival round: the presence window only starts next round.
            self.niv = r + 1;
            return (Phase::Accept(st), Action::Wait);
        }
        let present = crate::protocols::follower_with_label(obs, st.ell);
        if !present {
            // The promised follower is gone: prune the map and go home.
            self.z.as_mut().expect("Accept requires a map").remove(st.j as usize, st.ell);
            self.niv = r + 1;
            return match st.walker.back_move() {
                Some(mv) => {
                    st.backtracking = true;
                    (Phase::Accept(st), mv)
                }
                None => {
                    (Phase::FollowUp, Action::Wait)
                }
            };
        }
        if r == st.window_last {
            // Window survived: return without touching the map.
            self.niv = r + 1;
            st.backtracking = true;
            if st.j == 1 {
                return (Phase::FollowUp, Action::Wait);
            }
            return (Phase::Accept(st), Action::Wait);
        }
        self.niv = st.window_last;
        (Phase::Accept(st), Action::Wait)
    }

    fn drive(&mut self, r: u64, obs: &Observation<'_>) -> Action {
        let phase = std::mem::replace(&mut self.phase, Phase::FollowUp);
        let (phase, action) = match phase {
            Phase::Invite => {
                let last = self.step_start + self.tm.invite_len() - 1;
                if r < last {
                    self.niv = last;
                    (Phase::Invite, Action::Wait)
                } else {
                    self.niv = r + 1;
                    if searcher_present(obs) {
                        (Phase::Wfa { start: r + 1 }, Action::Wait)
                    } else {
                        let t = r + 1;
                        (
                            Phase::Sfg {
                                deadline: t + self.tm.wfa_len(),
                                camp: Camp::PreWait { until: t + self.tm.t },
                            },
                            Action::Wait,
                        )
                    }
                }
            }
            Phase::Wfa { start } => {
                let last = start + self.tm.wfa_len() - 1;
                if !searcher_present(obs) {
                    // Premature stop: k rounds were spent waiting (this round
                    // included), shortening the search deadline accordingly.
                    let k = r - start + 1;
                    let t = r + 1;
                    self.niv = r + 1;
                    (
                        Phase::Sfg {
                            deadline: t + self.tm.wfa_len() - k,
                            camp: Camp::PreWait { until: t + self.tm.t },
                        },
                        Action::Wait,
                    )
                } else if r == last {
                    self.niv = r + 1;
                    (Phase::FollowUp, Action::Wait)
                } else {
                    self.niv = last;
                    (Phase::Wfa { start }, Action::Wait)
                }
            }
            Phase::Sfg { deadline, camp } => self.sfg_round(r, obs, deadline, camp),
            Phase::Sfi => {
                let wait_last = self.step_start + self.tm.t - 1;
                if self.step == 1 {
                    if r < wait_last {
                        self.niv = wait_last;
                        (Phase::Sfi, Action::Wait)
                    } else {
                        // The scouting walk starts next round.
                        self.niv = r + 1;
                        (
                            Phase::SfiIm(ImRecorder::new(self.im_kind(), self.terms.clone(), self.bound)),
                            Action::Wait,
                        )
                    }
                } else {
                    let last = self.step_start + self.tm.t + 2 * self.tm.x - 1;
                    if r < last {
                        self.niv = last;
                        (Phase::Sfi, Action::Wait)
                    } else {
                        (self.accept_or_follow_up(r), Action::Wait)
                    }
                }
            }
            Phase::SfiIm(mut rec) => {
                let a = rec.round(obs);
                self.niv = r + 1;
                if rec.done() {
                    self.z = Some(rec.into_map());
                    (self.accept_or_follow_up(r), a)
                } else {
                    (Phase::SfiIm(rec), a)
                }
            }
            Phase::Accept(st) => self.accept_round(r, obs, st),
            Phase::FollowUp => self.follow_up(r),
            Phase::Restart { target, mut consumed, mut entry, mut within } => {
                let (action, reps) = self.log[entry];
                within += 1;
                consumed += 1;
                if within == reps {
                    entry += 1;
                    within = 0;
                }
                if consumed == target {
                    self.finished = true;
                }
                self.niv = if action == Action::Wait {
                    // The rest of the current run is identical Wait rounds.
                    let run_left = if within == 0 { 0 } else { reps - within };
                    r + 1 + run_left.min(target - consumed)
                } else {
                    r + 1
                };
                (Phase::Restart { target, consumed, entry, within }, action)
            }
        };
        self.phase = phase;
        action
    }
}

impl SubBehavior for GroupSub {
    fn tag(&self) -> StateTag {
        match &self.phase {
            Phase::Invite => StateTag::Invite,
            Phase::Wfa { .. } => StateTag::WaitForAttendees,
            Phase::Sfg { .. } => StateTag::SearchForAGroup,
            Phase::Sfi | Phase::SfiIm(_) => StateTag::SearchForAnInvitation,
            Phase::Accept(_) => StateTag::AcceptAnInvitation,
            Phase::FollowUp => StateTag::FollowUp,
            Phase::Restart { .. } => StateTag::Restart,
        }
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        debug_assert!(!self.finished, "driven past completion");
        let was_process = !self.buildup;
        if was_process {
            // Note the meeting before driving: the final Process round's
            // transition into Build-up reads the completed tally.
            self.note_meeting(obs);
        }
        let tag_before = self.tag();
        let action = self.drive(obs.round, obs);
        if self.tag() != tag_before {
            // A state transition must surface in the next round's
            // announcement, whatever the new state's own schedule says.
            self.niv = self.niv.min(obs.round + 1);
        }
        if was_process {
            self.push_log(action, 1);
        }
        action
    }

    fn niv(&self) -> u64 {
        self.niv
    }

    fn skip(&mut self, reps: u64, obs: &Observation<'_>) {
        if !self.buildup {
            self.push_log(Action::Wait, reps);
            // The meeting count is constant across the span; the span's last
            // round gives the largest tie-breaking offset.
            self.note_meeting(obs);
        } else if let Phase::Restart { target, consumed, entry, within } = &mut self.phase {
            *consumed += reps;
            *within += reps;
            while *entry < self.log.len() && *within >= self.log[*entry].1 {
                *within -= self.log[*entry].1;
                *entry += 1;
            }
            if *consumed >= *target {
                self.finished = true;
                // Completion must surface as a fresh (Idle) announcement.
                self.niv = obs.round + 1;
            }
        }
    }

    fn finished(&self) -> bool {
        self.finished
    }
}

/// A standalone GROUP behavior for one agent: starts at the agent's wake
/// round, runs the procedure to completion, then retires.
pub fn group_behavior(
    label: u64,
    t: u64,
    bin: u8,
    seq: &ExploSeq,
) -> Result<Box<dyn Behavior>, TimingOverflow> {
    let tm = GroupTiming::new(t, seq.bound() as u64, seq.x_n())?;
    let seq = seq.clone();
    Ok(Box::new(Standalone::new(label, move |start| GroupSub::new(tm, bin, &seq, start))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::Behavior;
    use crate::engine::{run, RunConfig};
    use crate::engine::trace::Termination;
    use crate::explo::provide_sequence;
    use crate::graph::{enumerate_graphs, AgentSpec, Instance, DEFAULT_CORPUS_SEED, SCHEMA_VERSION};
    use std::collections::BTreeMap;

    #[test]
    fn pinned_timing_constants() {
        let tm = GroupTiming::new(10, 4, 10).unwrap();
        assert_eq!(tm.s, 1601);
        assert_eq!(tm.h, 264253);
        assert_eq!(tm.step_len, 264353);
        assert_eq!(tm.process_len, 1601 * 264353);
        assert_eq!(tm.time_bound(), 2 * 1601 * 264353);
    }

    #[test]
    fn oversized_parameters_are_rejected() {
        assert!(GroupTiming::new(u64::MAX / 4, 1 << 20, 1 << 20).is_err());
        assert!(group_time_bound(u64::MAX / 4, 1 << 20, 1 << 20).is_err());
    }

    fn edge_instance(agents: Vec<AgentSpec>, wakes: &[(usize, u64)]) -> (Instance, crate::explo::ExploSeq) {
        let corpus = enumerate_graphs(2, DEFAULT_CORPUS_SEED).unwrap();
        let seq = provide_sequence(2, &corpus).unwrap();
        let inst = Instance {
            schema_version: SCHEMA_VERSION,
            graph: corpus.graphs()[0].clone(),
            agents,
            wake_schedule: wakes.iter().copied().collect::<BTreeMap<_, _>>(),
            gk: 1,
            size_bound: 2,
        };
        (inst, seq)
    }

    fn good(label: u64, start_node: usize) -> AgentSpec {
        AgentSpec { label, start_node, byzantine: false, script: None }
    }

    #[test]
    fn solitary_follower_takes_the_full_bound() {
        // Alone, every step degenerates to Invite → empty search → Follow-up,
        // every Process round ties for the best meeting (count 1), and the
        // replay therefore re-runs all of Process but its first round: the
        // exit lands exactly on the worst-case bound.
        let (inst, seq) = edge_instance(vec![good(5, 0)], &[(0, 0)]);
        let t = 2;
        let tm = GroupTiming::new(t, 2, seq.x_n()).unwrap();
        let behaviors: Vec<Box<dyn Behavior>> = vec![group_behavior(5, t, 0, &seq).unwrap()];
        let res = run(&inst, behaviors, &RunConfig::compressed(3 * tm.process_len)).unwrap();
        let expect = 2 * tm.process_len - 1;
        assert_eq!(
            res.summary.agents[0].termination,
            Termination::Completed { round: expect, node: 0 },
        );
        assert!(expect < tm.time_bound());
    }

    #[test]
    fn follower_and_searcher_exit_together() {
        let (inst, seq) = edge_instance(vec![good(2, 0), good(7, 0)], &[(0, 0), (1, 0)]);
        let t = 2;
        let tm = GroupTiming::new(t, 2, seq.x_n()).unwrap();
        let behaviors: Vec<Box<dyn Behavior>> = vec![
            group_behavior(2, t, 0, &seq).unwrap(),
            group_behavior(7, t, 1, &seq).unwrap(),
        ];
        let res = run(&inst, behaviors, &RunConfig::compressed(3 * tm.process_len)).unwrap();
        let exits: Vec<_> = res
            .summary
            .agents
            .iter()
            .map(|a| match a.termination {
                Termination::Completed { round, node } => (round, node),
                ref other => panic!("expected completion, got {other:?}"),
            })
            .collect();
        assert_eq!(exits[0], exits[1], "exit (round, node) must be common");
        assert!(exits[0].0 < tm.time_bound());
    }

    #[test]
    fn compression_preserves_group_semantics() {
        // The replay log and meeting tally are maintained through skips, so
        // the frozen and literal engines must produce identical traces.
        let t = 2;
        let mk = |(_, seq): &(Instance, crate::explo::ExploSeq)| -> Vec<Box<dyn Behavior>> {
            vec![
                group_behavior(2, t, 0, seq).unwrap(),
                group_behavior(7, t, 1, seq).unwrap(),
            ]
        };
        let pair = edge_instance(vec![good(2, 0), good(7, 1)], &[(0, 0), (1, 1)]);
        let tm = GroupTiming::new(t, 2, pair.1.x_n()).unwrap();
        let horizon = 3 * tm.process_len;
        let fast = run(&pair.0, mk(&pair), &RunConfig::compressed(horizon).with_full_trace()).unwrap();
        let slow = run(&pair.0, mk(&pair), &RunConfig::uncompressed(horizon).with_full_trace()).unwrap();
        let a = fast.trace.expanded_steps();
        let b = slow.trace.expanded_steps();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x, y, "first trace divergence");
        }
        assert_eq!(a.len(), b.len(), "trace lengths differ");
        assert!(fast.summary.skipped_agent_rounds > 0, "compression must actually engage");
    }

    #[test]
    fn antipodal_pair_groups_on_a_ring() {
        // A searcher and a follower starting on opposite sides of a 4-ring.
        // The follower's final search excursion gets cut off by its deadline
        // mid-map-construction; the interrupt must unwind that walk too, or
        // the replay log stops matching the true trajectory and the pair
        // drifts apart in Build-up.
        use crate::graph::make_oriented_ring;
        let corpus = enumerate_graphs(4, DEFAULT_CORPUS_SEED).unwrap();
        let seq = provide_sequence(4, &corpus).unwrap();
        let t = seq.x_n();
        let tm = GroupTiming::new(t, 4, seq.x_n()).unwrap();
        let inst = Instance {
            schema_version: SCHEMA_VERSION,
            graph: make_oriented_ring(4).unwrap(),
            agents: vec![good(1, 0), good(2, 2)],
            wake_schedule: [(0usize, 0u64), (1, 0)].into_iter().collect::<BTreeMap<_, _>>(),
            gk: 1,
            size_bound: 4,
        };
        let behaviors: Vec<Box<dyn Behavior>> = vec![
            group_behavior(1, t, 1, &seq).unwrap(),
            group_behavior(2, t, 0, &seq).unwrap(),
        ];
        let res = run(&inst, behaviors, &RunConfig::compressed(3 * tm.process_len)).unwrap();
        let exits: Vec<_> = res
            .summary
            .agents
            .iter()
            .map(|a| match a.termination {
                Termination::Completed { round, node } => (round, node),
                ref other => panic!("expected completion, got {other:?}"),
            })
            .collect();
        assert_eq!(exits[0], exits[1], "exit (round, node) must be common");
        assert!(exits[0].0 < tm.time_bound());
    }

    #[test]
    fn delayed_pair_still_exits_together() {
        // Start spread within T must not break the common exit.
        let (inst, seq) = edge_instance(vec![good(2, 0), good(7, 1)], &[(0, 0), (1, 1)]);
        let t = 2;
        let tm = GroupTiming::new(t, 2, seq.x_n()).unwrap();
        let behaviors: Vec<Box<dyn Behavior>> = vec![
            group_behavior(2, t, 0, &seq).unwrap(),
            group_behavior(7, t, 1, &seq).unwrap(),
        ];
        let res = run(&inst, behaviors, &RunConfig::compressed(3 * tm.process_len)).unwrap();
        let exits: Vec<_> = res
            .summary
            .agents
            .iter()
            .map(|a| match a.termination {
                Termination::Completed { round, node } => (round, node),
                ref other => panic!("expected completion, got {other:?}"),
            })
            .collect();
        assert_eq!(exits[0], exits[1], "exit (round, node) must be common");
        assert!(exits[0].0 < 1 + tm.time_bound());
    }
}
