//! Port-walking motor shared by the protocol state machines.
//!
//! A [`PathWalker`] performs a prefix of the exploration sequence one
//! traversal per round, records the port of every arrival, and can replay the
//! recorded ports in reverse to return to its start node. The enclosing state
//! machine decides *when* to move; the walker only answers *where*.
//!
//! [`ImRecorder`] layers the imperfect-map construction on top: a full
//! exploration with backtrack (2·X rounds) that records claimed labels of
//! co-located agents at every forward position.

use std::sync::Arc;

use crate::behavior::{Action, Observation, StateTag};
use crate::explo::{explo_step, ImperfectMap};

/// Walks a prefix of the exploration sequence and back.
///
/// Usage per round, in order: [`PathWalker::note_entry`] with the round's
/// observed entry port (always — this is how arrivals are recorded), then one
/// of [`PathWalker::forward_move`] / [`PathWalker::back_move`] depending on
/// the machine's phase. All methods are idempotent per round only in the
/// sense the caller guarantees: call each at most once per round.
#[derive(Clone, Debug)]
pub struct PathWalker {
    terms: Arc<[u32]>,
    /// Forward traversals to perform in total.
    target: u64,
    /// Forward traversals initiated.
    moved: u64,
    /// Forward arrivals recorded (trails `moved` by one until the next
    /// round's entry port is observed).
    arrived: u64,
    /// Reverse traversals initiated.
    back_moved: u64,
    /// Arrival ports of forward traversals, in order.
    rec: Vec<u16>,
    /// Entry port feeding the next forward step (first-step convention 0).
    entry: u16,
}

impl PathWalker {
    /// A walker for the first `target` traversals of the sequence.
    pub fn new(terms: Arc<[u32]>, target: u64) -> Self {
        assert!(target as usize <= terms.len(), "walk longer than the sequence");
        PathWalker { terms, target, moved: 0, arrived: 0, back_moved: 0, rec: Vec::new(), entry: 0 }
    }

    /// A walker over the full sequence (X − 1 traversals).
    pub fn full(terms: Arc<[u32]>) -> Self {
        let target = terms.len() as u64;
        PathWalker::new(terms, target)
    }

    /// Records the pending arrival's entry port, if a move is outstanding.
    pub fn note_entry(&mut self, entry_port: Option<u16>) {
        if self.arrived < self.moved {
            let p = entry_port.expect("a traversal just completed, so the entry port is known");
            self.rec.push(p);
            self.entry = p;
            self.arrived += 1;
        }
    }

    /// The next forward traversal, or `None` when the prefix is complete.
    pub fn forward_move(&mut self, degree: u16) -> Option<Action> {
        if self.moved >= self.target {
            return None;
        }
        let term = self.terms[self.moved as usize];
        let entry = if self.moved == 0 { 0 } else { self.entry };
        self.moved += 1;
        Some(Action::Move(explo_step(entry, degree, term)))
    }

    /// The next reverse traversal, or `None` once back at the start node.
    /// Only forward traversals whose arrival was recorded are reversed, so
    /// the caller must keep feeding [`PathWalker::note_entry`].
    pub fn back_move(&mut self) -> Option<Action> {
        let remaining = self.arrived.checked_sub(self.back_moved)?;
        if remaining == 0 {
            return None;
        }
        let port = self.rec[(remaining - 1) as usize];
        self.back_moved += 1;
        Some(Action::Move(port))
    }

    /// 1-based position along the walk (1 = start node).
    pub fn position(&self) -> u64 {
        self.arrived + 1
    }

    /// Whether every forward traversal has been initiated.
    pub fn forward_done(&self) -> bool {
        self.moved >= self.target
    }

    /// Net forward traversals not yet reversed.
    pub fn depth(&self) -> u64 {
        self.moved - self.back_moved
    }
}

/// Which claimed states an imperfect map records.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImKind {
    /// q = 0: anyone claiming follower status.
    AnyFollower,
    /// q = 1: only `Wait-for-attendees` claimants.
    WaitingFollower,
}

impl ImKind {
    fn records(self, tag: &StateTag) -> bool {
        match self {
            ImKind::AnyFollower => tag.claims_follower(),
            ImKind::WaitingFollower => *tag == StateTag::WaitForAttendees,
        }
    }
}

/// Builds an imperfect map: exploration with backtrack over exactly 2·X
/// rounds, recording claimed labels at each forward position. Byzantine
/// claims are recorded verbatim — the map is imperfect by design.
#[derive(Clone, Debug)]
pub struct ImRecorder {
    kind: ImKind,
    bound: usize,
    x: u64,
    /// Rounds consumed so far (0..2X).
    tick: u64,
    walker: PathWalker,
    lists: Vec<Vec<u64>>,
}

impl ImRecorder {
    pub fn new(kind: ImKind, terms: Arc<[u32]>, bound: usize) -> Self {
        let x = terms.len() as u64 + 1;
        let lists = vec![Vec::new(); x as usize];
        ImRecorder { kind, bound, x, tick: 0, walker: PathWalker::full(terms), lists }
    }

    /// Total rounds the construction occupies.
    pub fn duration(&self) -> u64 {
        2 * self.x
    }

    /// Drives one round; call exactly once per round until [`Self::done`].
    pub fn round(&mut self, obs: &Observation<'_>) -> Action {
        assert!(self.tick < 2 * self.x, "recorder driven past completion");
        self.walker.note_entry(obs.entry_port);
        let action = if self.tick < self.x {
            // Forward phase: record at the current position, then move
            // (except at the farthest position, where the round is idle).
            let j = self.walker.position() as usize;
            let list = &mut self.lists[j - 1];
            for a in obs.iter() {
                if self.kind.records(&a.claimed_state) {
                    list.push(a.claimed_label);
                }
            }
            self.walker.forward_move(obs.degree).unwrap_or(Action::Wait)
        } else {
            // Backtrack phase: X − 1 reverse traversals, then one idle round
            // at the start node.
            self.walker.back_move().unwrap_or(Action::Wait)
        };
        self.tick += 1;
        action
    }

    pub fn done(&self) -> bool {
        self.tick >= 2 * self.x
    }

    /// Records a pending arrival outside [`Self::round`]; harmless to call
    /// in the same round as `round` (noting an arrival is idempotent).
    pub fn note_entry(&mut self, entry_port: Option<u16>) {
        self.walker.note_entry(entry_port);
    }

    /// Net outstanding traversals of the construction walk.
    pub fn depth(&self) -> u64 {
        self.walker.depth()
    }

    /// Surrenders the walker so an interrupted construction can unwind its
    /// outstanding traversals.
    pub fn into_walker(self) -> PathWalker {
        self.walker
    }

    /// The finished map; call after [`Self::done`].
    pub fn into_map(self) -> ImperfectMap {
        assert!(self.done(), "map read before the walk completed");
        ImperfectMap::new(self.lists, self.bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::Announcement;
    use crate::graph::{make_oriented_ring, PortGraph};

    fn drive_walker(g: &PortGraph, start: usize, terms: &[u32]) -> (PathWalker, Vec<usize>) {
        // Simulates a forward walk plus full backtrack over a known graph,
        // feeding entry ports the way the engine would.
        let terms: Arc<[u32]> = terms.into();
        let mut w = PathWalker::full(terms);
        let mut at = start;
        let mut entry = None;
        let mut visited = vec![start];
        loop {
            w.note_entry(entry);
            let deg = g.degree(at);
            let Some(Action::Move(p)) = w.forward_move(deg) else { break };
            let (next, arr) = g.traverse(at, p);
            at = next;
            entry = Some(arr);
            visited.push(at);
        }
        loop {
            w.note_entry(entry);
            let Some(Action::Move(p)) = w.back_move() else { break };
            let (next, arr) = g.traverse(at, p);
            at = next;
            entry = Some(arr);
        }
        assert_eq!(at, start, "backtrack must return to the start node");
        (w, visited)
    }

    #[test]
    fn backtrack_returns_home_on_rings_and_stars() {
        let ring = make_oriented_ring(5).unwrap();
        drive_walker(&ring, 2, &[1, 0, 1, 1, 0, 1]);
        // A star: node 0 adjacent to 1, 2, 3.
        let star = PortGraph::new(vec![
            vec![(1, 0), (2, 0), (3, 0)],
            vec![(0, 0)],
            vec![(0, 1)],
            vec![(0, 2)],
        ])
        .unwrap();
        drive_walker(&star, 0, &[0, 1, 2, 0, 1]);
        drive_walker(&star, 3, &[1, 1, 2, 0]);
    }

    #[test]
    fn position_tracks_forward_progress() {
        let ring = make_oriented_ring(4).unwrap();
        let terms: Arc<[u32]> = vec![1u32, 1, 1].into();
        let mut w = PathWalker::full(terms);
        let mut at = 0usize;
        let mut entry = None;
        for expect in 1..=3u64 {
            w.note_entry(entry);
            assert_eq!(w.position(), expect);
            let Some(Action::Move(p)) = w.forward_move(ring.degree(at)) else { panic!() };
            let (next, arr) = ring.traverse(at, p);
            at = next;
            entry = Some(arr);
        }
        w.note_entry(entry);
        assert_eq!(w.position(), 4);
        assert!(w.forward_move(ring.degree(at)).is_none());
    }

    #[test]
    fn recorder_spans_two_x_rounds_and_records_by_kind() {
        let terms: Arc<[u32]> = vec![1u32, 1, 1].into();
        let mut rec = ImRecorder::new(ImKind::WaitingFollower, terms, 4);
        assert_eq!(rec.duration(), 8);
        let waiting = Announcement::new(9, StateTag::WaitForAttendees);
        let searching = Announcement::new(4, StateTag::SearchForAGroup);
        let ring = make_oriented_ring(4).unwrap();
        let mut at = 0usize;
        let mut entry = None;
        let mut rounds = 0;
        while !rec.done() {
            let co = [waiting.clone(), searching.clone()];
            let obs = Observation { round: rounds, degree: ring.degree(at), entry_port: entry, co_located: &co };
            match rec.round(&obs) {
                Action::Move(p) => {
                    let (next, arr) = ring.traverse(at, p);
                    at = next;
                    entry = Some(arr);
                }
                _ => entry = None,
            }
            rounds += 1;
        }
        assert_eq!(rounds, 8);
        assert_eq!(at, 0, "recorder ends at its start node");
        let map = rec.into_map();
        // Only the Wait-for-attendees claimant is recorded, at every forward
        // position (the pair is co-located the whole time in this setup).
        assert!(map.is_useful());
        for j in 1..=4 {
            assert_eq!(map.list(j), &[9]);
        }
        assert_eq!(map.index(), Some(1));
    }
}
