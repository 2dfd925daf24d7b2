//! The top-level gathering algorithm, with the LEARN and CHECK subroutines
//! and the strong-team arithmetic.
//!
//! Each agent derives a size bound `N = 2^(2^GK)` from the global knowledge
//! `GK`, explores once to wake everyone up, and then processes its
//! transformed label bit by bit: each bit drives three iterations of
//! GROUP + MERGE + LEARN, and every third iteration ends with the one-round
//! gathering check. LEARN spreads optimism — an agent becomes an Optimist
//! when its own counter `ω` is already nonzero, or when it is past the first
//! half of its bit schedule and sees a plausible full team; Pessimists that
//! watch an Optimist for `2·T_N` consecutive rounds convert. The check
//! declares gathering when the agent's own `ω` reached the second or third
//! generation and more than `f̃(p)` distinct agents transmit `ω = 3`, where
//! `f̃(p)` is the largest Byzantine count a strong team of `p` agents could
//! contain.
//!
//! Every iteration is padded to a fixed stride by a final wait anchored to
//! the agent's own start round, so all good agents stay aligned on the same
//! iteration index at every round.

use thiserror::Error;

use crate::behavior::{
    Action, Announcement, Behavior, BehaviorStatus, Observation, Payload, RoundCtx, StateTag,
};
use crate::explo::ExploSeq;
use crate::labels::{transform, TransformedLabel};
use crate::protocols::group::{group_time_bound, GroupSub, GroupTiming, TimingOverflow};
use crate::protocols::merge::{merge_time_bound, MergeSub};
use crate::protocols::walk::PathWalker;
use crate::protocols::SubBehavior;

/// Minimum size of a strong team for `f` Byzantine agents: `5f² + 6f + 2`.
pub fn strong_team_min(f: u64) -> u64 {
    5 * f * f + 6 * f + 2
}

/// The strong-team threshold `R(y) = (5y + 1)(y + 1) + 1`.
pub fn team_bound(y: u64) -> u64 {
    (5 * y + 1) * (y + 1) + 1
}

/// The Byzantine-count estimate `f̃(p) = max{y ≥ 0 | R(y) ≤ p}`, defined
/// only for `p ≥ 2` (the smallest valid team: `R(0) = 2`).
pub fn f_tilde(p: u64) -> Option<u64> {
    if p < 2 {
        return None;
    }
    let mut y = 0;
    while team_bound(y + 1) <= p {
        y += 1;
    }
    Some(y)
}

/// The size bound `N = 2^(2^gk)` an agent derives from global knowledge.
pub fn n_from_gk(gk: u32) -> Result<u64, GatherError> {
    if gk >= 6 {
        return Err(GatherError::GkTooLarge { gk });
    }
    Ok(1u64 << (1u32 << gk))
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum GatherError {
    #[error("2^(2^{gk}) does not fit in 64-bit round arithmetic")]
    GkTooLarge { gk: u32 },
    #[error("exploration sequence is for bound {got}, expected {expected}")]
    BoundMismatch { expected: u64, got: u64 },
    #[error(transparent)]
    Overflow(#[from] TimingOverflow),
}

/// The global timing ledger shared by all agents with equal `GK`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimingProfile {
    pub n: u64,
    /// Exploration time `X_N`.
    pub x: u64,
    /// Worst-case GROUP duration `G_N = group_time_bound(X_N, N)`.
    pub g: u64,
    /// Worst-case MERGE duration `M_N = merge_time_bound(X_N + G_N, N)`.
    pub m: u64,
    /// The LEARN wait unit `T_N = X_N + G_N + M_N`.
    pub t: u64,
    /// Per-iteration stride `3·X_N + 4·(G_N + M_N) + 2`.
    pub stride: u64,
}

impl TimingProfile {
    pub fn new(n: u64, seq: &ExploSeq) -> Result<Self, GatherError> {
        if seq.bound() as u64 != n {
            return Err(GatherError::BoundMismatch { expected: n, got: seq.bound() as u64 });
        }
        let x = seq.x_n();
        let overflow = TimingOverflow { t: x, n, x };
        let g = group_time_bound(x, n, x)?;
        let m = merge_time_bound(x.checked_add(g).ok_or(overflow)?, x)?;
        let checked = || -> Option<(u64, u64)> {
            let t = x.checked_add(g)?.checked_add(m)?;
            let stride = 3u64
                .checked_mul(x)?
                .checked_add(4u64.checked_mul(g.checked_add(m)?)?)?
                .checked_add(2)?;
            Some((t, stride))
        };
        let (t, stride) = checked().ok_or(overflow)?;
        Ok(TimingProfile { n, x, g, m, t, stride })
    }

    /// Offset of the start of iteration `i + 1` from the agent's own start:
    /// `X_N + i·stride`.
    pub fn deadline(&self, i: u64) -> u64 {
        self.x + i * self.stride
    }
}

/// The LEARN subroutine: one Learning round, then a `3·T_N` wait as Optimist
/// or Pessimist. Never moves.
struct LearnSub {
    t_n: u64,
    gamma: u64,
    omega_nonzero: bool,
    /// Whether `2i > 3·|ℓ*|` (past the first half of the bit schedule).
    late_half: bool,
    learning_done: bool,
    left: u64,
    optimist: bool,
    z: u64,
    /// Consecutive wait rounds with an Optimist claimant in sight.
    streak: u64,
    saw_window: bool,
    finished: bool,
    niv: u64,
}

impl LearnSub {
    fn new(t_n: u64, gamma: u64, omega_nonzero: bool, late_half: bool, start: u64) -> Self {
        LearnSub {
            t_n,
            gamma,
            omega_nonzero,
            late_half,
            learning_done: false,
            left: 3 * t_n,
            optimist: false,
            z: gamma,
            streak: 0,
            saw_window: false,
            finished: false,
            niv: start,
        }
    }

    fn tag(&self) -> StateTag {
        if !self.learning_done {
            StateTag::Learning
        } else if self.optimist {
            StateTag::Optimist
        } else {
            StateTag::Pessimist
        }
    }

    /// The returned pair (ρ, γ); valid once finished.
    fn result(&self) -> (u8, u64) {
        let rho = if self.optimist || self.saw_window { 0 } else { 1 };
        (rho, self.z)
    }

    fn note_optimists(&mut self, obs: &Observation<'_>, reps: u64) {
        if self.optimist {
            return;
        }
        if obs.iter().any(|a| a.claimed_state == StateTag::Optimist) {
            self.streak += reps;
            if self.streak >= 2 * self.t_n {
                self.saw_window = true;
            }
        } else {
            self.streak = 0;
        }
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        let r = obs.round;
        if !self.learning_done {
            let x = obs.iter().filter(|a| a.claimed_state == StateTag::Learning).count() as u64;
            self.z = self.gamma.max(x);
            let plausible = f_tilde(self.z).is_some_and(|ft| x >= self.z - ft);
            self.optimist = self.omega_nonzero || (self.late_half && plausible);
            self.learning_done = true;
            self.niv = r + 1;
        } else {
            self.note_optimists(obs, 1);
            self.left -= 1;
            if self.left == 0 {
                self.finished = true;
                self.niv = r + 1;
            } else {
                self.niv = r + self.left;
            }
        }
        Action::Wait
    }

    fn skip(&mut self, reps: u64, obs: &Observation<'_>) {
        debug_assert!(self.learning_done && self.left > reps);
        self.note_optimists(obs, reps);
        self.left -= reps;
    }
}

enum GPhase {
    /// The wake-up exploration: `X_N` rounds, no backtrack.
    Explo { walker: PathWalker, tick: u64 },
    Group(GroupSub),
    Merge(MergeSub),
    Learn(LearnSub),
    /// The one-round gathering check.
    Check,
    /// Padding wait; `until` is its last round.
    Gap { until: u64 },
    Done,
}

/// One agent's execution of the full gathering algorithm.
pub struct GatherBehavior {
    label: u64,
    lstar: TransformedLabel,
    tp: TimingProfile,
    group_tm: GroupTiming,
    seq: ExploSeq,
    start: Option<u64>,
    i: u64,
    omega: u64,
    rho: u8,
    gamma: u64,
    phase: GPhase,
    done: bool,
    niv: u64,
}

/// Builds the gathering behavior for one agent from its label and the
/// global knowledge `gk`; `seq` must be the exploration sequence for
/// `N = 2^(2^gk)`.
pub fn gather_behavior(
    label: u64,
    gk: u32,
    seq: &ExploSeq,
) -> Result<Box<dyn Behavior>, GatherError> {
    let n = n_from_gk(gk)?;
    let tp = TimingProfile::new(n, seq)?;
    let group_tm = GroupTiming::new(tp.x, n, tp.x)?;
    Ok(Box::new(GatherBehavior {
        label,
        lstar: transform(label),
        tp,
        group_tm,
        seq: seq.clone(),
        start: None,
        i: 1,
        omega: 0,
        rho: 0,
        gamma: 1,
        phase: GPhase::Explo { walker: PathWalker::full(seq.terms().into()), tick: 0 },
        done: false,
        niv: 0,
    }))
}

impl GatherBehavior {
    fn bit_count(&self) -> u64 {
        3 * self.lstar.len() as u64
    }

    /// Starts iteration `i` (already set) with a GROUP execution beginning
    /// at round `r_start`.
    fn start_group(&mut self, r_start: u64) {
        if self.i % 3 == 1 {
            self.omega = 0;
            let k = (self.i / 3) as usize + 1;
            self.rho = self.lstar.bit(k);
        }
        self.phase = GPhase::Group(GroupSub::new(self.group_tm, self.rho, &self.seq, r_start));
        self.niv = r_start;
    }

    /// Ends the per-iteration work at round `r`: pad to the deadline, then
    /// advance the loop counter.
    fn after_iteration(&mut self, r: u64) {
        let start = self.start.expect("iterations run only after the start round is known");
        let next_start = start + self.tp.deadline(self.i);
        debug_assert!(r < next_start, "iteration overran its deadline");
        if r + 1 == next_start {
            self.advance(r);
        } else {
            self.phase = GPhase::Gap { until: next_start - 1 };
            self.niv = next_start - 1;
        }
    }

    /// Consumes the last padding round `r` and begins the next iteration
    /// (or exits the loop).
    fn advance(&mut self, r: u64) {
        self.i += 1;
        if self.i > self.bit_count() {
            self.phase = GPhase::Done;
            self.done = true;
            self.niv = r + 1;
        } else {
            self.start_group(r + 1);
        }
    }

    /// The gathering check: TRUE iff own ω ∈ {2, 3} and more than `f̃(p)`
    /// distinct labels transmit ω = 3 with the check word.
    fn check_passes(&self, obs: &Observation<'_>) -> bool {
        if !(self.omega == 2 || self.omega == 3) {
            return false;
        }
        let Some(ft) = f_tilde(obs.agent_count() as u64) else {
            return false;
        };
        let mut labels: Vec<u64> = obs
            .iter()
            .filter(|a| {
                a.claimed_state == StateTag::Checking
                    && a.payload == Payload::Check { omega: 3 }
            })
            .map(|a| a.claimed_label)
            .collect();
        labels.sort_unstable();
        labels.dedup();
        labels.len() as u64 > ft
    }

    /// Folds a finished LEARN result into the loop variables and moves on.
    fn learn_done(&mut self, rho: u8, z: u64, r: u64) {
        self.gamma = z;
        if rho == 0 {
            self.omega += 1;
        }
        if self.i % 3 == 0 {
            self.phase = GPhase::Check;
            self.niv = r + 1;
        } else {
            self.after_iteration(r);
        }
    }
}

impl Behavior for GatherBehavior {
    fn announce(&mut self, ctx: &RoundCtx) -> Announcement {
        if self.start.is_none() {
            self.start = Some(ctx.round);
        }
        // A sub-procedure that completed inside a frozen span hands over at
        // the next fresh announcement.
        if let GPhase::Group(sub) = &self.phase {
            if sub.finished() {
                let t = self.tp.x + self.tp.g;
                self.phase =
                    GPhase::Merge(MergeSub::new(t, self.label, &self.seq, ctx.round));
            }
        }
        let (state, payload) = match &self.phase {
            GPhase::Explo { .. } | GPhase::Gap { .. } | GPhase::Done => {
                (StateTag::Idle, Payload::None)
            }
            GPhase::Group(sub) => (sub.tag(), sub.payload()),
            GPhase::Merge(sub) => (sub.tag(), sub.payload()),
            GPhase::Learn(sub) => (sub.tag(), Payload::None),
            GPhase::Check => {
                (StateTag::Checking, Payload::Check { omega: self.omega.min(3) as u8 })
            }
        };
        Announcement { claimed_label: self.label, claimed_state: state, payload }
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        let r = obs.round;
        match &mut self.phase {
            GPhase::Explo { walker, tick } => {
                walker.note_entry(obs.entry_port);
                let action = walker.forward_move(obs.degree).unwrap_or(Action::Wait);
                *tick += 1;
                self.niv = r + 1;
                if *tick == self.tp.x {
                    self.start_group(r + 1);
                }
                action
            }
            GPhase::Group(sub) => {
                let action = sub.act(obs);
                self.niv = sub.niv();
                if sub.finished() {
                    let t = self.tp.x + self.tp.g;
                    self.phase = GPhase::Merge(MergeSub::new(t, self.label, &self.seq, r + 1));
                    self.niv = r + 1;
                }
                action
            }
            GPhase::Merge(sub) => {
                let action = sub.act(obs);
                self.niv = sub.niv();
                if sub.finished() {
                    let late = 2 * self.i > self.bit_count();
                    self.phase = GPhase::Learn(LearnSub::new(
                        self.tp.t,
                        self.gamma,
                        self.omega != 0,
                        late,
                        r + 1,
                    ));
                    self.niv = r + 1;
                }
                action
            }
            GPhase::Learn(sub) => {
                let action = sub.act(obs);
                self.niv = sub.niv;
                if sub.finished {
                    let (rho, z) = sub.result();
                    self.learn_done(rho, z, r);
                }
                action
            }
            GPhase::Check => {
                if self.check_passes(obs) {
                    return Action::Declare;
                }
                self.after_iteration(r);
                Action::Wait
            }
            GPhase::Gap { until } => {
                if r >= *until {
                    self.advance(r);
                } else {
                    self.niv = *until;
                }
                Action::Wait
            }
            GPhase::Done => {
                self.niv = r + 1;
                Action::Wait
            }
        }
    }

    fn next_interesting_round(&self) -> u64 {
        self.niv
    }

    fn skip(&mut self, reps: u64, obs: &Observation<'_>) {
        match &mut self.phase {
            GPhase::Group(sub) => sub.skip(reps, obs),
            GPhase::Merge(sub) => sub.skip(reps, obs),
            GPhase::Learn(sub) => sub.skip(reps, obs),
            GPhase::Gap { .. } | GPhase::Done => {}
            GPhase::Explo { .. } | GPhase::Check => {
                unreachable!("one-round and moving phases are never frozen")
            }
        }
    }

    fn status(&self) -> BehaviorStatus {
        if self.done {
            BehaviorStatus::CompletedWithoutDeclare
        } else {
            BehaviorStatus::Active
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::trace::Termination;
    use crate::engine::{run, RunConfig};
    use crate::explo::provide_sequence;
    use crate::graph::{
        enumerate_graphs, make_oriented_ring, AgentSpec, Instance, DEFAULT_CORPUS_SEED,
        SCHEMA_VERSION,
    };
    use std::collections::BTreeMap;

    #[test]
    fn strong_team_and_f_tilde_oracles() {
        assert_eq!(strong_team_min(0), 2);
        assert_eq!(strong_team_min(1), 13);
        assert_eq!(strong_team_min(2), 34);
        assert_eq!(f_tilde(0), None);
        assert_eq!(f_tilde(1), None);
        assert_eq!(f_tilde(2), Some(0));
        assert_eq!(f_tilde(12), Some(0));
        assert_eq!(f_tilde(13), Some(1));
        assert_eq!(f_tilde(33), Some(1));
        assert_eq!(f_tilde(34), Some(2));
        // Brute force over the whole small range.
        for p in 2..=1000u64 {
            let brute = (0..=p).filter(|&y| team_bound(y) <= p).max().unwrap();
            assert_eq!(f_tilde(p), Some(brute), "p={p}");
        }
    }

    #[test]
    fn n_from_gk_table() {
        assert_eq!(n_from_gk(0).unwrap(), 2);
        assert_eq!(n_from_gk(1).unwrap(), 4);
        assert_eq!(n_from_gk(2).unwrap(), 16);
        assert_eq!(n_from_gk(5).unwrap(), 1 << 32);
        assert!(n_from_gk(6).is_err());
    }

    fn seq_for(n: usize) -> crate::explo::ExploSeq {
        let corpus = enumerate_graphs(n.min(6), DEFAULT_CORPUS_SEED).unwrap();
        provide_sequence(n, &corpus).unwrap()
    }

    #[test]
    fn timing_profile_is_consistent() {
        let seq = seq_for(4);
        let tp = TimingProfile::new(4, &seq).unwrap();
        assert_eq!(tp.x, seq.x_n());
        assert_eq!(tp.g, group_time_bound(tp.x, 4, tp.x).unwrap());
        assert_eq!(tp.m, merge_time_bound(tp.x + tp.g, tp.x).unwrap());
        assert_eq!(tp.t, tp.x + tp.g + tp.m);
        assert_eq!(tp.stride, 3 * tp.x + 4 * (tp.g + tp.m) + 2);
        assert_eq!(tp.deadline(2), tp.x + 2 * tp.stride);
        assert!(TimingProfile::new(16, &seq).is_err(), "bound mismatch is rejected");
    }

    #[test]
    fn learn_window_counting() {
        use crate::behavior::Announcement;
        // A Pessimist converts only after 2·T_N consecutive Optimist rounds.
        let t_n = 5;
        let own = vec![Announcement::new(1, StateTag::Learning)];
        let with_opt = vec![
            Announcement::new(1, StateTag::Pessimist),
            Announcement::new(9, StateTag::Optimist),
        ];
        let alone = vec![Announcement::new(1, StateTag::Pessimist)];

        // Interrupted streak: 2T_N − 1 rounds, a break, then the rest.
        let mut sub = LearnSub::new(t_n, 1, false, false, 0);
        sub.act(&Observation { round: 0, degree: 2, entry_port: None, co_located: &own });
        assert_eq!(sub.tag(), StateTag::Pessimist);
        let mut r = 1;
        for _ in 0..(2 * t_n - 1) {
            sub.act(&Observation { round: r, degree: 2, entry_port: None, co_located: &with_opt });
            r += 1;
        }
        sub.act(&Observation { round: r, degree: 2, entry_port: None, co_located: &alone });
        r += 1;
        while !sub.finished {
            sub.act(&Observation { round: r, degree: 2, entry_port: None, co_located: &with_opt });
            r += 1;
        }
        assert_eq!(sub.result(), (1, 1), "a broken streak never reaches the window");

        // Uninterrupted 2·T_N rounds convert, with part of the span skipped.
        let mut sub = LearnSub::new(t_n, 1, false, false, 0);
        sub.act(&Observation { round: 0, degree: 2, entry_port: None, co_located: &own });
        sub.act(&Observation { round: 1, degree: 2, entry_port: None, co_located: &with_opt });
        sub.skip(2 * t_n - 1, &Observation {
            round: 2 * t_n,
            degree: 2,
            entry_port: None,
            co_located: &with_opt,
        });
        let mut r = 2 * t_n + 1;
        while !sub.finished {
            sub.act(&Observation { round: r, degree: 2, entry_port: None, co_located: &alone });
            r += 1;
        }
        assert_eq!(sub.result(), (0, 1), "a full window converts the Pessimist");
    }

    fn gather_instance(
        size: usize,
        agents: Vec<AgentSpec>,
        wakes: &[(usize, u64)],
    ) -> Instance {
        Instance {
            schema_version: SCHEMA_VERSION,
            graph: make_oriented_ring(size).unwrap(),
            agents,
            wake_schedule: wakes.iter().copied().collect::<BTreeMap<_, _>>(),
            gk: 1,
            size_bound: size,
        }
    }

    fn good(label: u64, start_node: usize) -> AgentSpec {
        AgentSpec { label, start_node, byzantine: false, script: None }
    }

    #[test]
    fn solitary_agent_never_declares() {
        // Alone, LEARN always returns ρ = 1 (z = 1 keeps the plausibility
        // condition false and no Optimist ever appears), ω stays 0, and the
        // loop runs to exhaustion without declaring.
        let seq = seq_for(4);
        let tp = TimingProfile::new(4, &seq).unwrap();
        let inst = gather_instance(4, vec![good(1, 0)], &[(0, 0)]);
        let behaviors: Vec<Box<dyn Behavior>> = vec![gather_behavior(1, 1, &seq).unwrap()];
        let bits = 3 * transform(1).len() as u64;
        let horizon = tp.deadline(bits) + 2;
        let res = run(&inst, behaviors, &RunConfig::compressed(horizon)).unwrap();
        match res.summary.agents[0].termination {
            Termination::Completed { round, .. } => {
                assert_eq!(round, tp.deadline(bits) - 1, "loop exits at the final deadline");
            }
            ref other => panic!("expected completion without declare, got {other:?}"),
        }
    }

    #[test]
    fn two_agents_declare_together() {
        // The core liveness scenario: two good agents on a 4-ring. Once
        // both are past the first half of their bit schedules they turn
        // Optimist, ω climbs to 3, and the third-iteration check fires for
        // both in the same round at the same node.
        let seq = seq_for(4);
        let tp = TimingProfile::new(4, &seq).unwrap();
        let inst = gather_instance(4, vec![good(1, 0), good(2, 2)], &[(0, 0), (1, 0)]);
        let behaviors: Vec<Box<dyn Behavior>> =
            vec![gather_behavior(1, 1, &seq).unwrap(), gather_behavior(2, 1, &seq).unwrap()];
        let bits = 3 * transform(2).len() as u64;
        let horizon = tp.deadline(bits) + 2;
        let res = run(&inst, behaviors, &RunConfig::compressed(horizon)).unwrap();
        let declares: Vec<_> = res
            .summary
            .agents
            .iter()
            .map(|a| match a.termination {
                Termination::Declared { round, node } => (round, node),
                ref other => panic!("expected declare, got {other:?}"),
            })
            .collect();
        assert_eq!(declares[0], declares[1], "common (round, node) declare");
        // The shorter of the two labels dominates the polynomial bound.
        let l_min_bits = 1u64;
        let bound = 12 * (4 * l_min_bits + 8) * (tp.t + 1);
        assert!(declares[0].0 <= bound, "{} > {bound}", declares[0].0);
    }

    #[test]
    fn staggered_wake_still_declares_together() {
        let seq = seq_for(4);
        let tp = TimingProfile::new(4, &seq).unwrap();
        let inst = gather_instance(4, vec![good(1, 0), good(2, 2)], &[(0, 0), (1, 3)]);
        let behaviors: Vec<Box<dyn Behavior>> =
            vec![gather_behavior(1, 1, &seq).unwrap(), gather_behavior(2, 1, &seq).unwrap()];
        let bits = 3 * transform(2).len() as u64;
        let horizon = tp.deadline(bits) + tp.x + 4;
        let res = run(&inst, behaviors, &RunConfig::compressed(horizon)).unwrap();
        let declares: Vec<_> = res
            .summary
            .agents
            .iter()
            .map(|a| match a.termination {
                Termination::Declared { round, node } => (round, node),
                ref other => panic!("expected declare, got {other:?}"),
            })
            .collect();
        assert_eq!(declares[0], declares[1], "common (round, node) declare");
    }

    #[test]
    fn compressed_prefix_matches_uncompressed() {
        // A full uncompressed run is unaffordable, but the opening segment
        // (exploration, first GROUP steps) must match exactly.
        let seq = seq_for(4);
        let inst = gather_instance(4, vec![good(1, 0), good(2, 2)], &[(0, 0), (1, 3)]);
        let mk = || -> Vec<Box<dyn Behavior>> {
            vec![gather_behavior(1, 1, &seq).unwrap(), gather_behavior(2, 1, &seq).unwrap()]
        };
        let horizon = 50_000;
        let fast = run(&inst, mk(), &RunConfig::compressed(horizon).with_full_trace()).unwrap();
        let slow = run(&inst, mk(), &RunConfig::uncompressed(horizon).with_full_trace()).unwrap();
        let a = fast.trace.expanded_steps();
        let b = slow.trace.expanded_steps();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x, y, "first trace divergence");
        }
        assert_eq!(a.len(), b.len(), "trace lengths differ");
    }
}
