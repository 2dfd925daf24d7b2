//! The agent-facing interface of the simulator.
//!
//! Behaviors (good-agent protocols and Byzantine scripts alike) interact with
//! the engine exclusively through this module. An agent never receives a node
//! identifier: its entire sensory input is an [`Observation`] — the degree of
//! its current node, the port it arrived by, and the multiset of
//! announcements shouted at the node this round. This boundary is what makes
//! the graphs *anonymous* structurally rather than by convention.
//!
//! ## Round protocol
//!
//! Each executed round, the engine calls on every awake agent:
//!
//! 1. [`Behavior::announce`] — produce the announcement shouted this round
//!    (computed from history through the previous round plus the current
//!    location's degree/entry port);
//! 2. [`Behavior::act`] — given the full observation of the round (including
//!    the agent's own announcement), choose an action. Moves take effect at
//!    the next round boundary.
//!
//! ## Wait compression
//!
//! After `act`, the engine may consult [`Behavior::next_interesting_round`]:
//! the earliest future round at which the behavior's announcement or action
//! may differ from the current round's, *assuming its observation stays
//! identical*. When every awake agent waits and declares a future interesting
//! round, the engine fast-forwards the clock and informs each behavior via
//! [`Behavior::skip`] that a block of identical rounds elapsed. Declaring too
//! small a round is always safe; declaring too large a round is a bug that the
//! compressed engine reports as a contract violation.

use std::fmt;
use std::sync::Arc;

/// Protocol state tags carried in announcements. The serialized names are
/// byte-exact strings; Byzantine scripts may claim any tag, including
/// free-form ones via [`StateTag::Other`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateTag {
    /// Not inside any routine (initial exploration, final waits).
    Idle,
    // GROUP follower states.
    Invite,
    WaitForAttendees,
    SearchForAGroup,
    // GROUP searcher states.
    SearchForAnInvitation,
    AcceptAnInvitation,
    // Shared GROUP states.
    FollowUp,
    Restart,
    // MERGE states.
    Census,
    Election,
    Synchronisation,
    // LEARN states.
    Learning,
    Optimist,
    Pessimist,
    /// The one-round gathering check.
    Checking,
    /// Arbitrary claimed state (Byzantine use).
    Other(Arc<str>),
}

impl StateTag {
    pub fn as_str(&self) -> &str {
        match self {
            StateTag::Idle => "Idle",
            StateTag::Invite => "Invite",
            StateTag::WaitForAttendees => "Wait-for-attendees",
            StateTag::SearchForAGroup => "Search-for-a-group",
            StateTag::SearchForAnInvitation => "Search-for-an-invitation",
            StateTag::AcceptAnInvitation => "Accept-an-invitation",
            StateTag::FollowUp => "Follow-up",
            StateTag::Restart => "Restart",
            StateTag::Census => "Census",
            StateTag::Election => "Election",
            StateTag::Synchronisation => "Synchronisation",
            StateTag::Learning => "Learning",
            StateTag::Optimist => "Optimist",
            StateTag::Pessimist => "Pessimist",
            StateTag::Checking => "Checking",
            StateTag::Other(s) => s,
        }
    }

    /// Parses the byte-exact serialized name; unknown names become `Other`.
    pub fn from_name(name: &str) -> StateTag {
        match name {
            "Idle" => StateTag::Idle,
            "Invite" => StateTag::Invite,
            "Wait-for-attendees" => StateTag::WaitForAttendees,
            "Search-for-a-group" => StateTag::SearchForAGroup,
            "Search-for-an-invitation" => StateTag::SearchForAnInvitation,
            "Accept-an-invitation" => StateTag::AcceptAnInvitation,
            "Follow-up" => StateTag::FollowUp,
            "Restart" => StateTag::Restart,
            "Census" => StateTag::Census,
            "Election" => StateTag::Election,
            "Synchronisation" => StateTag::Synchronisation,
            "Learning" => StateTag::Learning,
            "Optimist" => StateTag::Optimist,
            "Pessimist" => StateTag::Pessimist,
            "Checking" => StateTag::Checking,
            other => StateTag::Other(other.into()),
        }
    }

    /// Whether the tag claims follower status in GROUP (states a follower
    /// occupies while participating, as opposed to the role-ambiguous
    /// `Follow-up` padding state).
    pub fn claims_follower(&self) -> bool {
        matches!(self, StateTag::Invite | StateTag::WaitForAttendees | StateTag::SearchForAGroup)
    }

    /// Whether the tag claims searcher status in GROUP.
    pub fn claims_searcher(&self) -> bool {
        matches!(self, StateTag::SearchForAnInvitation | StateTag::AcceptAnInvitation)
    }
}

impl fmt::Display for StateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The byte-exact keyword transmitted by the gathering check; Byzantine
/// scripts can forge announcements carrying it.
pub const CHECK_GATHERING_WORD: &str = "Check-gathering";

/// Structured announcement payloads.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Payload {
    #[default]
    None,
    /// Census list transmitted during the election waiting periods
    /// (lexicographically ordered pairwise-distinct labels).
    Census(Arc<[u64]>),
    /// The gathering check: an omega value together with the byte-exact word
    /// [`CHECK_GATHERING_WORD`].
    Check { omega: u8 },
}

/// What one agent shouts in one round. Good agents always claim their true
/// label; Byzantine fields are unconstrained and may change every round.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Announcement {
    pub claimed_label: u64,
    pub claimed_state: StateTag,
    pub payload: Payload,
}

impl Announcement {
    pub fn new(claimed_label: u64, claimed_state: StateTag) -> Self {
        Announcement { claimed_label, claimed_state, payload: Payload::None }
    }
}

/// The complete sensory input of one agent in one round.
#[derive(Debug)]
pub struct Observation<'a> {
    pub round: u64,
    /// Degree of the current node.
    pub degree: u16,
    /// Port by which the agent arrived this round; `None` if it waited or was
    /// just woken.
    pub entry_port: Option<u16>,
    /// Announcements of all agents at the node this round, own included,
    /// sorted by (claimed label, internal arrival index). The ordering is a
    /// trace-reproducibility canonicalization, never protocol semantics.
    pub co_located: &'a [Announcement],
}

impl Observation<'_> {
    /// Number of agents at the node this round (self included).
    pub fn agent_count(&self) -> usize {
        self.co_located.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Announcement> {
        self.co_located.iter()
    }
}

/// Location context available when producing an announcement (before the
/// round's observation exists).
#[derive(Clone, Copy, Debug)]
pub struct RoundCtx {
    pub round: u64,
    pub degree: u16,
    pub entry_port: Option<u16>,
}

/// What an agent does with its round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Wait,
    /// Traverse the edge with this local port; must be `< degree`.
    Move(u16),
    /// Terminate declaring that gathering is achieved.
    Declare,
}

/// Lifecycle of a behavior, reported after each action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BehaviorStatus {
    Active,
    /// The protocol ran to completion without declaring gathering; the engine
    /// retires the agent and records the round (distinct from `Declare`).
    CompletedWithoutDeclare,
}

/// Sentinel for "no future change on my own initiative".
pub const NEVER: u64 = u64::MAX;

/// A deterministic per-agent behavior (protocol or adversary script).
pub trait Behavior {
    /// The announcement shouted this round.
    fn announce(&mut self, ctx: &RoundCtx) -> Announcement;

    /// Chooses the round's action from the full observation.
    fn act(&mut self, obs: &Observation<'_>) -> Action;

    /// Earliest future round at which the announcement or action may differ
    /// from this round's, assuming the observation repeats identically.
    /// Consulted after [`Behavior::act`]. Return [`NEVER`] for "only external
    /// events can change me".
    fn next_interesting_round(&self) -> u64;

    /// Accounts for `reps` additional rounds identical to the last executed
    /// one (same observation `obs`, action `Wait`, same announcement). Called
    /// only by the compressing engine, and only with
    /// `last_round + reps < next_interesting_round()`.
    fn skip(&mut self, reps: u64, obs: &Observation<'_>);

    /// Lifecycle after the last `act`.
    fn status(&self) -> BehaviorStatus {
        BehaviorStatus::Active
    }
}

/// Boxed behavior factory used when one run needs a fresh behavior per agent.
pub type BehaviorFactory<'a> = dyn Fn(u64) -> Box<dyn Behavior> + 'a;
