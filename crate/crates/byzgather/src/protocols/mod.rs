//! The good-agent protocol stack.
//!
//! Three procedures build on each other: [`group`] forms a gathered group
//! around invitations, [`merge`] elects and joins the strongest census list
//! nearby, and [`gather`] iterates both (plus a learning phase and a final
//! check) to solve Byzantine gathering outright. [`walk`] holds the shared
//! port-walking motor used by all of them.
//!
//! Internally each procedure is a *sub-behavior*: a state machine that runs
//! for a bounded number of rounds and then reports completion, so that
//! [`gather`] can chain them and standalone wrappers can expose each one as a
//! full [`Behavior`](crate::behavior::Behavior) for focused experiments.

pub mod gather;
pub mod group;
pub mod merge;
pub mod walk;

use crate::behavior::{
    Action, Announcement, Behavior, BehaviorStatus, Observation, Payload, RoundCtx, StateTag,
};

/// A bounded protocol phase driven by an enclosing behavior.
///
/// The enclosing behavior forwards `announce`/`act`/`skip` to the active
/// sub-behavior and switches to the next phase once `finished` reports true.
/// Contract mirrors [`Behavior`](crate::behavior::Behavior): `tag`/`payload`
/// describe the announcement for the round being entered, `act` consumes
/// exactly the non-skipped rounds, `skip` accounts for frozen `Wait` spans
/// (with `obs.round` the last covered round), and `niv` bounds the next
/// self-initiated change.
pub(crate) trait SubBehavior {
    fn tag(&self) -> StateTag;
    fn payload(&self) -> Payload {
        Payload::None
    }
    fn act(&mut self, obs: &Observation<'_>) -> Action;
    fn niv(&self) -> u64;
    fn skip(&mut self, reps: u64, obs: &Observation<'_>);
    fn finished(&self) -> bool;
}

/// Adapts one sub-behavior into a standalone [`Behavior`] that announces the
/// given label, runs the phase to completion, then waits one closing round
/// and retires. The sub-behavior is constructed at the agent's first
/// announced round (procedures anchor their schedules to their start round,
/// which is only known at wake time). The closing round lets a final
/// traversal land before the agent's terminal (round, node) is recorded, so
/// exit positions compare cleanly across agents.
pub(crate) struct Standalone<S: SubBehavior> {
    label: u64,
    state: LazyState<S>,
    closed: bool,
}

enum LazyState<S> {
    Pending(Box<dyn FnOnce(u64) -> S + Send>),
    Ready(S),
}

impl<S: SubBehavior> Standalone<S> {
    pub fn new(label: u64, make: impl FnOnce(u64) -> S + Send + 'static) -> Self {
        Standalone { label, state: LazyState::Pending(Box::new(make)), closed: false }
    }

    fn sub_mut(&mut self) -> &mut S {
        match &mut self.state {
            LazyState::Ready(s) => s,
            LazyState::Pending(_) => unreachable!("announce always precedes other calls"),
        }
    }
}

impl<S: SubBehavior> Behavior for Standalone<S> {
    fn announce(&mut self, ctx: &RoundCtx) -> Announcement {
        if let LazyState::Pending(_) = self.state {
            let LazyState::Pending(make) = std::mem::replace(
                &mut self.state,
                LazyState::Pending(Box::new(|_| unreachable!("placeholder"))),
            ) else {
                unreachable!()
            };
            self.state = LazyState::Ready(make(ctx.round));
        }
        let sub = match &self.state {
            LazyState::Ready(s) => s,
            LazyState::Pending(_) => unreachable!(),
        };
        let state = if sub.finished() { StateTag::Idle } else { sub.tag() };
        Announcement { claimed_label: self.label, claimed_state: state, payload: sub.payload() }
    }

    fn act(&mut self, obs: &Observation<'_>) -> Action {
        if self.sub_mut().finished() {
            self.closed = true;
            Action::Wait
        } else {
            self.sub_mut().act(obs)
        }
    }

    fn next_interesting_round(&self) -> u64 {
        match &self.state {
            LazyState::Ready(s) => s.niv(),
            LazyState::Pending(_) => 0,
        }
    }

    fn skip(&mut self, reps: u64, obs: &Observation<'_>) {
        self.sub_mut().skip(reps, obs);
    }

    fn status(&self) -> BehaviorStatus {
        if self.closed {
            BehaviorStatus::CompletedWithoutDeclare
        } else {
            BehaviorStatus::Active
        }
    }
}

/// Whether any co-located announcement claims a searcher state.
pub(crate) fn searcher_present(obs: &Observation<'_>) -> bool {
    obs.iter().any(|a| a.claimed_state.claims_searcher())
}

/// Whether some co-located announcement claims follower status under the
/// given label.
pub(crate) fn follower_with_label(obs: &Observation<'_>, label: u64) -> bool {
    obs.iter().any(|a| a.claimed_label == label && a.claimed_state.claims_follower())
}

/// Whether some co-located announcement claims `Wait-for-attendees` under the
/// given label.
pub(crate) fn waiting_follower_with_label(obs: &Observation<'_>, label: u64) -> bool {
    obs.iter()
        .any(|a| a.claimed_label == label && a.claimed_state == StateTag::WaitForAttendees)
}
