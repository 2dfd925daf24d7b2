//! The impossibility-construction harness: a family of ring instances on
//! which any fixed global knowledge is shown insufficient, and a fooling
//! check that replays one instance's execution against another.
//!
//! The family is built inductively. Member 0 is an oriented 4-ring with two
//! good agents on opposite nodes. Member i is an oriented ring of
//! `n_{i-1}^{4c}` nodes with a subject agent at a node `v0`, a block of
//! `n_{i-1}^c · μ_{i-1}` Byzantine agents on each node adjacent to `v0`, and
//! a strong team of good agents diametrically opposed, where `μ_{i-1}` and
//! `n_{i-1}` are the agent and node counts of member i−1 and `c` is the
//! degree of the algorithm's polynomial time bound.
//!
//! The fooling check runs the algorithm on member `j`, records the subject's
//! complete observation stream up to its termination round `k`, and then
//! builds Byzantine "shadow" scripts on member `j2 > j` that reproduce, at
//! the subject's node, exactly the co-located announcements it saw — the
//! reserves near `v0` shifting along the ring in lockstep with the subject
//! so that recruits and dismissals are always one move away. If the subject
//! cannot distinguish the two runs, it terminates on the larger ring while
//! every other good agent is far away: a premature declaration.
//!
//! The harness deliberately tests one concrete algorithm, not the universal
//! statement: its soundness condition is that the subject's behavior depends
//! on the observed announcement multisets only, which holds for every
//! behavior in this crate.

use serde::Serialize;
use thiserror::Error;

use crate::adversary::{PlayEntry, PlaybackScript, ScriptSpec};
use crate::behavior::{Action, Announcement, Behavior, Payload, StateTag};
use crate::engine::{run, RunConfig, RunResult, SubjectLog};
use crate::engine::trace::Termination;
use crate::graph::{make_oriented_ring, AgentSpec, Instance, SCHEMA_VERSION};
use crate::protocols::gather::strong_team_min;

/// Largest ring the family builder will materialize.
pub const NODE_BUDGET: u64 = 1 << 22;

/// Parameters of one family member.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FamilyParams {
    /// Degree of the algorithm's assumed polynomial time bound.
    pub c: u32,
    /// Index of the member to build.
    pub depth: u32,
}

/// One built family member with its construction bookkeeping.
#[derive(Clone, Debug)]
pub struct FamilyInstance {
    pub instance: Instance,
    /// Node of the subject agent (label 1).
    pub v0: usize,
    /// Agent index of the subject.
    pub subject: usize,
    /// Agent count of the previous member (0 at depth 0).
    pub mu_prev: u64,
    /// Node count of the previous member (0 at depth 0).
    pub n_prev: u64,
    /// Byzantine agents on each node adjacent to `v0`.
    pub byz_per_side: u64,
    /// Total Byzantine count.
    pub f: u64,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LowerBoundError {
    #[error("invalid family parameters: {0}")]
    InvalidParameter(String),
    #[error("family member needs {nodes} nodes, over the budget of {budget}")]
    BudgetExceeded { nodes: u64, budget: u64 },
    #[error("mirror needs {needed} shadows at round {round} but only {available} can arrive")]
    MirrorInfeasible { round: u64, needed: u64, available: u64 },
    #[error("subject did not declare within the horizon of {horizon} rounds")]
    Inconclusive { horizon: u64 },
    #[error("simulation rejected the instance: {0}")]
    Engine(String),
}

/// Builds family member `depth` for polynomial degree `c`.
pub fn build_family_instance(p: FamilyParams) -> Result<FamilyInstance, LowerBoundError> {
    if p.c < 1 {
        return Err(LowerBoundError::InvalidParameter("c must be at least 1".into()));
    }
    // Walk the induction up to the requested depth, tracking only the
    // bookkeeping (node and agent counts) of the predecessor.
    let mut n: u64 = 4;
    let mut mu: u64 = 2;
    let mut n_prev = 0u64;
    let mut mu_prev = 0u64;
    for _ in 0..p.depth {
        n_prev = n;
        mu_prev = mu;
        n = checked_pow(n_prev, 4 * p.c)?;
        if n > NODE_BUDGET {
            return Err(LowerBoundError::BudgetExceeded { nodes: n, budget: NODE_BUDGET });
        }
        let byz_per_side = checked_pow(n_prev, p.c)?
            .checked_mul(mu_prev)
            .ok_or(LowerBoundError::BudgetExceeded { nodes: u64::MAX, budget: NODE_BUDGET })?;
        let f = 2 * byz_per_side;
        mu = 1 + f + (strong_team_min(f) - 1);
    }

    let graph = make_oriented_ring(n as usize)
        .map_err(|e| LowerBoundError::InvalidParameter(e.to_string()))?;
    let mut agents = Vec::new();
    let v0 = 0usize;
    if p.depth == 0 {
        // Two good agents on opposite nodes of the 4-ring. The paper's
        // "label 0" agent is label 1 here (labels are positive integers).
        agents.push(AgentSpec { label: 1, start_node: v0, byzantine: false, script: None });
        agents.push(AgentSpec { label: 2, start_node: 2, byzantine: false, script: None });
    } else {
        let byz_per_side = checked_pow(n_prev, p.c)? * mu_prev;
        let f = 2 * byz_per_side;
        let goods_opposed = strong_team_min(f) - 1;
        let opposite = (n / 2) as usize;
        agents.push(AgentSpec { label: 1, start_node: v0, byzantine: false, script: None });
        let mut label = 2u64;
        for _ in 0..goods_opposed {
            agents.push(AgentSpec { label, start_node: opposite, byzantine: false, script: None });
            label += 1;
        }
        for side in [1usize, n as usize - 1] {
            for _ in 0..byz_per_side {
                agents.push(AgentSpec {
                    label,
                    start_node: side,
                    byzantine: true,
                    script: Some(ScriptSpec::Inert),
                });
                label += 1;
            }
        }
    }
    let wake_schedule = agents
        .iter()
        .enumerate()
        .filter(|(_, a)| !a.byzantine)
        .map(|(i, _)| (i, 0u64))
        .collect();
    let byz_per_side = if p.depth == 0 { 0 } else { checked_pow(n_prev, p.c)? * mu_prev };
    Ok(FamilyInstance {
        instance: Instance {
            schema_version: SCHEMA_VERSION,
            graph,
            agents,
            wake_schedule,
            gk: 1,
            size_bound: n as usize,
        },
        v0,
        subject: 0,
        mu_prev,
        n_prev,
        byz_per_side,
        f: 2 * byz_per_side,
    })
}

fn checked_pow(base: u64, exp: u32) -> Result<u64, LowerBoundError> {
    base.checked_pow(exp)
        .ok_or(LowerBoundError::BudgetExceeded { nodes: u64::MAX, budget: NODE_BUDGET })
}

/// One row of [`knowledge_size_table`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct KnowledgeRow {
    pub n: u64,
    /// `⌈log log n⌉`: the smallest g with `2^(2^g) >= n`.
    pub gk: u32,
    /// Bits needed to write `gk` down.
    pub bits: u32,
}

/// The global-knowledge size for each graph size: the separation between the
/// doubly-logarithmic value and its triply-logarithmic encoding length.
pub fn knowledge_size_table(n_values: &[u64]) -> Vec<KnowledgeRow> {
    n_values
        .iter()
        .map(|&n| {
            assert!(n >= 2, "graph sizes start at 2");
            let mut gk = 0u32;
            while gk < 6 && (1u64 << (1u32 << gk)) < n {
                gk += 1;
            }
            assert!((1u64 << (1u32 << gk)) >= n, "size out of the table's range");
            let bits = if gk == 0 { 1 } else { 32 - gk.leading_zeros() };
            KnowledgeRow { n, gk, bits }
        })
        .collect()
}

/// Algorithm under test: builds the behavior of a good agent from its label
/// and the shared global knowledge.
pub type AlgFactory<'a> = &'a dyn Fn(u64, u32) -> Box<dyn Behavior>;

/// The simplest foolable algorithm: declare gathering in the wake round.
/// Useful as a harness smoke test and as the CLI's `declare-now` choice.
pub fn declare_now(label: u64) -> Box<dyn Behavior> {
    struct DeclareNow {
        label: u64,
    }
    impl Behavior for DeclareNow {
        fn announce(&mut self, _ctx: &crate::behavior::RoundCtx) -> Announcement {
            Announcement::new(self.label, StateTag::Idle)
        }
        fn act(&mut self, _obs: &crate::behavior::Observation<'_>) -> Action {
            Action::Declare
        }
        fn next_interesting_round(&self) -> u64 {
            0
        }
        fn skip(&mut self, _reps: u64, _obs: &crate::behavior::Observation<'_>) {}
    }
    Box::new(DeclareNow { label })
}

/// Budgets of one fooling check.
#[derive(Clone, Copy, Debug)]
pub struct FoolingConfig {
    /// Horizon for the recording run; the subject must declare within it.
    pub horizon: u64,
}

impl Default for FoolingConfig {
    fn default() -> Self {
        FoolingConfig { horizon: 1 << 40 }
    }
}

/// Outcome of one fooling check.
#[derive(Clone, Debug, Serialize)]
pub struct FoolingReport {
    /// Depths compared.
    pub j: u32,
    pub j2: u32,
    /// Rounds from the subject's wake through its declaration in the
    /// recording run.
    pub k: u64,
    /// Whether the subject's observation streams agree for all k rounds.
    pub observations_identical: bool,
    /// Whether the subject declared at the same round in the replay run.
    pub declared_at_k: bool,
    /// Whether that declaration left some good agent behind.
    pub premature: bool,
    /// Peak number of shadow agents simultaneously with the subject.
    pub peak_shadows: u64,
}

impl FoolingReport {
    /// The fooling argument demonstrated: indistinguishable, declared,
    /// premature.
    pub fn passes(&self) -> bool {
        self.observations_identical && self.declared_at_k && self.premature
    }
}

impl std::fmt::Display for FoolingReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "fooling check: member {} replayed against member {}", self.j, self.j2)?;
        writeln!(f, "  subject declared after k = {} rounds in the recording run", self.k)?;
        writeln!(f, "  observation streams identical for k rounds: {}", self.observations_identical)?;
        writeln!(f, "  subject declared at round k in the replay:   {}", self.declared_at_k)?;
        writeln!(f, "  declaration premature (good agents absent):  {}", self.premature)?;
        write!(f, "  verdict: {}", if self.passes() { "FOOLED" } else { "not fooled" })
    }
}

/// Runs the fooling check between family members `j` and `j2` with default
/// budgets.
pub fn fooling_check(
    alg: AlgFactory<'_>,
    gk: u32,
    j: u32,
    j2: u32,
    c: u32,
) -> Result<FoolingReport, LowerBoundError> {
    fooling_check_with(alg, gk, j, j2, c, &FoolingConfig::default())
}

/// Runs the fooling check with explicit budgets.
pub fn fooling_check_with(
    alg: AlgFactory<'_>,
    gk: u32,
    j: u32,
    j2: u32,
    c: u32,
    cfg: &FoolingConfig,
) -> Result<FoolingReport, LowerBoundError> {
    if j >= j2 {
        return Err(LowerBoundError::InvalidParameter("j must be smaller than j2".into()));
    }

    // Recording run on member j.
    let fam_j = build_family_instance(FamilyParams { c, depth: j })?;
    let mut rc = RunConfig::compressed(cfg.horizon);
    rc.record_observations_for = Some(fam_j.subject);
    let res_j = run_member(&fam_j, alg, gk, &rc)?;
    let k = match res_j.summary.agents[fam_j.subject].termination {
        Termination::Declared { round, .. } => round + 1,
        _ => return Err(LowerBoundError::Inconclusive { horizon: cfg.horizon }),
    };
    let log_j = res_j.subject_log.expect("recording was requested");
    debug_assert_eq!(log_j.rounds(), k, "subject log must cover exactly k rounds");

    // Replay run on member j2 with mirror shadows.
    let fam_j2 = build_family_instance(FamilyParams { c, depth: j2 })?;
    let plan = plan_mirror(&log_j, fam_j2.byz_per_side)?;
    let peak_shadows = plan.peak;
    let mut rc2 = RunConfig::compressed(k + 2);
    rc2.record_observations_for = Some(fam_j2.subject);
    let res_j2 = {
        let mut scripts = plan.scripts.into_iter();
        let behaviors: Vec<Box<dyn Behavior>> = fam_j2
            .instance
            .agents
            .iter()
            .map(|a| {
                if a.byzantine {
                    scripts.next().expect("one script per Byzantine agent")
                } else {
                    alg(a.label, gk)
                }
            })
            .collect();
        run(&fam_j2.instance, behaviors, &rc2)
            .map_err(|e| LowerBoundError::Engine(e.to_string()))?
    };

    let log_j2 = res_j2.subject_log.expect("recording was requested");
    let observations_identical = streams_equal(&log_j, &log_j2, k);
    let declared_at_k = matches!(
        res_j2.summary.agents[fam_j2.subject].termination,
        Termination::Declared { round, .. } if round + 1 == k
    );
    let premature = res_j2.summary.premature_declares().contains(&1);
    Ok(FoolingReport {
        j,
        j2,
        k,
        observations_identical,
        declared_at_k,
        premature,
        peak_shadows,
    })
}

fn run_member(
    fam: &FamilyInstance,
    alg: AlgFactory<'_>,
    gk: u32,
    rc: &RunConfig,
) -> Result<RunResult, LowerBoundError> {
    let behaviors: Vec<Box<dyn Behavior>> = fam
        .instance
        .agents
        .iter()
        .map(|a| {
            if a.byzantine {
                crate::adversary::builtin_script(
                    a.script.as_ref().unwrap_or(&ScriptSpec::Inert),
                    a.label,
                )
            } else {
                alg(a.label, gk)
            }
        })
        .collect();
    run(&fam.instance, behaviors, rc).map_err(|e| LowerBoundError::Engine(e.to_string()))
}

/// A total order on announcements, used to canonicalize co-location
/// multisets before comparison and assignment.
fn ann_key(a: &Announcement) -> (u64, String, u8, Vec<u64>, u8) {
    let (kind, list, omega) = match &a.payload {
        Payload::None => (0u8, Vec::new(), 0u8),
        Payload::Census(l) => (1, l.to_vec(), 0),
        Payload::Check { omega } => (2, Vec::new(), *omega),
    };
    (a.claimed_label, a.claimed_state.as_str().to_owned(), kind, list, omega)
}

fn sorted_anns(anns: &[Announcement]) -> Vec<Announcement> {
    let mut v = anns.to_vec();
    v.sort_by(|a, b| ann_key(a).cmp(&ann_key(b)));
    v
}

/// Compares the first `k` rounds of two subject logs as run-length streams
/// of (entry port, degree, canonical co-location multiset).
fn streams_equal(a: &SubjectLog, b: &SubjectLog, k: u64) -> bool {
    let norm = |log: &SubjectLog| -> Vec<(u64, Option<u16>, u16, Vec<Announcement>)> {
        let mut out: Vec<(u64, Option<u16>, u16, Vec<Announcement>)> = Vec::new();
        let mut covered = 0u64;
        for e in &log.entries {
            if covered >= k {
                break;
            }
            let take = e.count.min(k - covered);
            covered += take;
            let obs = (e.entry_port, e.degree, sorted_anns(&e.co_located));
            match out.last_mut() {
                Some(last) if (last.1, last.2, &last.3) == (obs.0, obs.1, &obs.2) => last.0 += take,
                _ => out.push((take, obs.0, obs.1, obs.2)),
            }
        }
        out
    };
    a.rounds() >= k && b.rounds() >= k && norm(a) == norm(b)
}

/// A per-shadow announcement/action stream under construction.
struct StreamWriter {
    entries: Vec<PlayEntry>,
}

impl StreamWriter {
    fn push(&mut self, announcement: Announcement, action: Action, reps: u64) {
        if reps == 0 {
            return;
        }
        if let Some(last) = self.entries.last_mut() {
            if last.announcement == announcement && last.action == action {
                last.reps += reps;
                return;
            }
        }
        self.entries.push(PlayEntry { reps, announcement, action });
    }
}

struct MirrorPlan {
    /// One playback behavior per Byzantine agent, in instance order (good
    /// block first is skipped; order matches the builder's Byzantine order:
    /// the clockwise-adjacent node's agents, then the anti-clockwise ones).
    scripts: Vec<Box<dyn Behavior>>,
    peak: u64,
}

/// Ports of the oriented ring.
const CW: u16 = 0;
const ACW: u16 = 1;

/// Builds the shadow scripts reproducing the recorded co-location stream.
///
/// Invariant maintained round by round: unassigned shadows sit on the two
/// nodes adjacent to the subject's current node (the clockwise and
/// anti-clockwise reserves), moving in lockstep with it; assigned shadows sit
/// with the subject announcing the recorded multiset. Every recruitment and
/// dismissal is then a single (or empty) move at the boundary round.
fn plan_mirror(log: &SubjectLog, per_side: u64) -> Result<MirrorPlan, LowerBoundError> {
    let total = (2 * per_side) as usize;
    let mut streams: Vec<StreamWriter> = (0..total).map(|_| StreamWriter { entries: Vec::new() }).collect();
    // Shadow ids 0..per_side start clockwise-adjacent to v0, the rest
    // anti-clockwise-adjacent (matching the builder's placement order).
    let mut cw: Vec<usize> = (0..per_side as usize).collect();
    let mut acw: Vec<usize> = (per_side as usize..total).collect();
    let mut assigned: Vec<usize> = Vec::new();
    let mut peak = 0u64;
    let idle = |id: usize| Announcement::new(1_000_000 + id as u64, StateTag::Idle);

    // The recorded multiset the shadows must reproduce: the subject's
    // co-location minus one copy of its own announcement.
    let companions = |e: &crate::engine::SubjectEntry| -> Vec<Announcement> {
        let mut m = sorted_anns(&e.co_located);
        let own = e.announcement.clone();
        if let Some(pos) = m.iter().position(|a| *a == own) {
            m.remove(pos);
        }
        m
    };
    // What a co-moving agent does while the subject performs `a`.
    let follow = |a: Action| -> Action {
        match a {
            Action::Move(p) => Action::Move(p),
            _ => Action::Wait,
        }
    };

    let entries = &log.entries;
    for (i, e) in entries.iter().enumerate() {
        let m = companions(e);
        peak = peak.max(m.len() as u64);
        if m.len() != assigned.len() {
            // The boundary handling below always adjusts the roster before
            // the entry starts; a mismatch here means the very first entry
            // needs companions, which no shadow can reach in time.
            return Err(LowerBoundError::MirrorInfeasible {
                round: e.start_round,
                needed: m.len() as u64,
                available: 0,
            });
        }
        let next = entries.get(i + 1);
        let bulk = if next.is_some() { e.count - 1 } else { e.count };

        // Bulk rounds: everyone keeps formation.
        for (slot, &id) in assigned.iter().enumerate() {
            streams[id].push(m[slot].clone(), follow(e.action), bulk);
        }
        for &id in cw.iter().chain(acw.iter()) {
            streams[id].push(idle(id), follow(e.action), bulk);
        }

        // Boundary round (the entry's last round): adjust the roster for the
        // next entry's multiset size while the subject performs `e.action`.
        let Some(next) = next else { break };
        let m_next = companions(next).len();
        let a = e.action;

        let mut dismissed: Vec<usize> = Vec::new();
        while assigned.len() > m_next {
            dismissed.push(assigned.pop().expect("roster is non-empty"));
        }
        let mut recruits: Vec<(usize, Action)> = Vec::new();
        while assigned.len() + recruits.len() < m_next {
            // A recruit must reach the subject's next node in one step: the
            // reserve it comes from depends on where the subject is heading.
            let pick = match a {
                Action::Move(CW) => cw.pop().map(|id| (id, Action::Wait)),
                Action::Move(ACW) => acw.pop().map(|id| (id, Action::Wait)),
                _ => cw
                    .pop()
                    .map(|id| (id, Action::Move(ACW)))
                    .or_else(|| acw.pop().map(|id| (id, Action::Move(CW)))),
            };
            match pick {
                Some(r) => recruits.push(r),
                None => {
                    return Err(LowerBoundError::MirrorInfeasible {
                        round: next.start_round,
                        needed: m_next as u64,
                        available: (assigned.len() + recruits.len()) as u64,
                    })
                }
            }
        }

        // Emit the boundary round. Current companions (kept and dismissed
        // alike) still show this entry's multiset.
        for (slot, &id) in assigned.iter().chain(dismissed.iter()).enumerate() {
            let act = if slot < assigned.len() {
                follow(a)
            } else {
                // A dismissal re-joins whichever reserve is one step away.
                match a {
                    Action::Move(_) => Action::Wait,
                    _ => Action::Move(CW),
                }
            };
            streams[id].push(m[slot].clone(), act, 1);
        }
        for &(id, act) in &recruits {
            streams[id].push(idle(id), act, 1);
        }
        for &id in cw.iter().chain(acw.iter()) {
            streams[id].push(idle(id), follow(a), 1);
        }

        // Book the roster changes.
        for id in dismissed {
            match a {
                Action::Move(CW) => acw.push(id),
                Action::Move(ACW) => cw.push(id),
                _ => cw.push(id),
            }
        }
        for (id, _) in recruits {
            assigned.push(id);
        }
    }

    let scripts = streams
        .into_iter()
        .enumerate()
        .map(|(id, w)| {
            Box::new(PlaybackScript::new(w.entries, idle(id))) as Box<dyn Behavior>
        })
        .collect();
    Ok(MirrorPlan { scripts, peak })
}
