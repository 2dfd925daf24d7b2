//! Port-numbered anonymous graphs, problem instances, and test corpora.
//!
//! Node identifiers exist only for the engine's bookkeeping: agent behaviors
//! never receive them (see [`crate::behavior`]), which enforces anonymity
//! structurally. Agents can only sense the degree of their current node and
//! the local port numbers of incident edges.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adversary::ScriptSpec;

/// Current version of the instance JSON schema. The field is mandatory in
/// serialized instances.
pub const SCHEMA_VERSION: u32 = 1;

/// A connected undirected graph with a local port numbering at every node.
///
/// `adjacency[v][p]` is the pair `(neighbor, reciprocal_port)`: following port
/// `p` from `v` reaches `neighbor`, entering it through `reciprocal_port`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortGraph {
    adjacency: Vec<Vec<(usize, u16)>>,
}

impl PortGraph {
    /// Builds a graph from an adjacency structure, checking all invariants.
    pub fn new(adjacency: Vec<Vec<(usize, u16)>>) -> Result<Self, GraphError> {
        let g = PortGraph { adjacency };
        g.check()?;
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, v: usize) -> u16 {
        self.adjacency[v].len() as u16
    }

    /// Follows `port` out of `v`; returns the neighbor and the entry port on
    /// the neighbor's side.
    pub fn traverse(&self, v: usize, port: u16) -> (usize, u16) {
        self.adjacency[v][port as usize]
    }

    fn check(&self) -> Result<(), GraphError> {
        let n = self.adjacency.len();
        if n < 2 {
            return Err(GraphError::Invariant("graph must have at least 2 nodes".into()));
        }
        for (v, nbrs) in self.adjacency.iter().enumerate() {
            if nbrs.is_empty() {
                return Err(GraphError::Invariant(format!("node {v} is isolated")));
            }
            let mut seen = vec![false; n];
            for (p, &(u, q)) in nbrs.iter().enumerate() {
                if u >= n {
                    return Err(GraphError::Invariant(format!("node {v} port {p}: bad neighbor {u}")));
                }
                if u == v {
                    return Err(GraphError::Invariant(format!("self-loop at node {v}")));
                }
                if seen[u] {
                    return Err(GraphError::Invariant(format!("parallel edge {v}-{u}")));
                }
                seen[u] = true;
                let back = self
                    .adjacency[u]
                    .get(q as usize)
                    .ok_or_else(|| GraphError::Invariant(format!("node {v} port {p}: reciprocal port {q} out of range")))?;
                if *back != (v, p as u16) {
                    return Err(GraphError::Invariant(format!(
                        "port reciprocity violated on edge {v}(port {p}) - {u}(port {q})"
                    )));
                }
            }
        }
        // Connectivity by BFS from node 0.
        let mut visited = vec![false; n];
        let mut queue = vec![0usize];
        visited[0] = true;
        while let Some(v) = queue.pop() {
            for &(u, _) in &self.adjacency[v] {
                if !visited[u] {
                    visited[u] = true;
                    queue.push(u);
                }
            }
        }
        if visited.iter().any(|&b| !b) {
            return Err(GraphError::Invariant("graph is not connected".into()));
        }
        Ok(())
    }

    /// Feeds a canonical byte encoding of the graph into `h`.
    pub fn hash_into(&self, h: &mut Sha256) {
        h.update((self.adjacency.len() as u64).to_le_bytes());
        for nbrs in &self.adjacency {
            h.update((nbrs.len() as u64).to_le_bytes());
            for &(u, q) in nbrs {
                h.update((u as u64).to_le_bytes());
                h.update(q.to_le_bytes());
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph invariant violated: {0}")]
    Invariant(String),
    #[error("corpus bound exceeded: requested {requested}, maximum {max}")]
    CorpusTooLarge { requested: usize, max: usize },
}

/// Ring where every node's port 0 leads clockwise and port 1 anti-clockwise.
pub fn make_oriented_ring(size: usize) -> Result<PortGraph, GraphError> {
    if size < 3 {
        return Err(GraphError::InvalidParameter(format!(
            "oriented ring needs at least 3 nodes, got {size}"
        )));
    }
    let adjacency = (0..size)
        .map(|k| vec![((k + 1) % size, 1), ((k + size - 1) % size, 0)])
        .collect();
    PortGraph::new(adjacency)
}

/// Hard cap on corpus enumeration; beyond it port-numbering enumeration
/// explodes combinatorially.
pub const CORPUS_MAX_NODES: usize = 6;

/// Default seed for the pseudo-random sample of port numberings at sizes 4-6.
pub const DEFAULT_CORPUS_SEED: u64 = 0x42595a_47415448; // "BYZ GATH"

/// Number of sampled graphs per size in 4..=6 (in addition to the oriented
/// ring of that size, which is always included).
pub const CORPUS_SAMPLES_PER_SIZE: usize = 7;

/// A fixed, deterministic set of verification graphs with a content digest.
#[derive(Clone, Debug)]
pub struct Corpus {
    graphs: Vec<PortGraph>,
    max_nodes: usize,
    digest: [u8; 32],
}

impl Corpus {
    pub fn graphs(&self) -> &[PortGraph] {
        &self.graphs
    }

    /// Graphs with at most `bound` nodes.
    pub fn graphs_up_to(&self, bound: usize) -> impl Iterator<Item = &PortGraph> {
        self.graphs.iter().filter(move |g| g.node_count() <= bound)
    }

    pub fn max_nodes(&self) -> usize {
        self.max_nodes
    }

    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }

    pub fn digest_hex(&self) -> String {
        self.digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Enumerates the default verification corpus up to `max_nodes` nodes.
///
/// Sizes 2 and 3 are exhaustive over connected graphs *and* port numberings;
/// sizes 4-6 contribute the oriented ring plus a deterministic pseudo-random
/// sample of port-numbered connected graphs drawn with `seed`. The stream is
/// fully deterministic for a fixed `(max_nodes, seed)`.
pub fn enumerate_graphs(max_nodes: usize, seed: u64) -> Result<Corpus, GraphError> {
    if max_nodes < 2 {
        return Err(GraphError::InvalidParameter("corpus needs max_nodes >= 2".into()));
    }
    if max_nodes > CORPUS_MAX_NODES {
        return Err(GraphError::CorpusTooLarge { requested: max_nodes, max: CORPUS_MAX_NODES });
    }
    let mut graphs = Vec::new();
    for size in 2..=max_nodes.min(3) {
        for mask in connected_edge_masks(size) {
            graphs.extend(all_port_numberings(size, &mask));
        }
    }
    for size in 4..=max_nodes {
        graphs.push(make_oriented_ring(size)?);
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (size as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let masks = connected_edge_masks(size);
        for _ in 0..CORPUS_SAMPLES_PER_SIZE {
            let mask = masks[rng.gen_range(0..masks.len())].clone();
            graphs.push(random_port_numbering(size, &mask, &mut rng));
        }
    }
    let mut h = Sha256::new();
    h.update(b"byzgather-corpus-v1");
    h.update((graphs.len() as u64).to_le_bytes());
    for g in &graphs {
        g.hash_into(&mut h);
    }
    let digest = h.finalize().into();
    Ok(Corpus { graphs, max_nodes, digest })
}

/// All edge sets (as lists of node pairs) of connected graphs on `size`
/// labeled nodes, in deterministic order.
fn connected_edge_masks(size: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..size)
        .flat_map(|a| ((a + 1)..size).map(move |b| (a, b)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &e)| e)
            .collect();
        if edges.len() < size - 1 {
            continue;
        }
        // Connectivity check via union-find.
        let mut parent: Vec<usize> = (0..size).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in &edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        let root = find(&mut parent, 0);
        if (0..size).all(|v| find(&mut parent, v) == root) {
            out.push(edges);
        }
    }
    out
}

fn incident_lists(size: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut inc = vec![Vec::new(); size];
    for (i, &(a, b)) in edges.iter().enumerate() {
        inc[a].push(i);
        inc[b].push(i);
    }
    inc
}

fn graph_from_ports(size: usize, edges: &[(usize, usize)], edge_port: &[(u16, u16)]) -> PortGraph {
    let mut adjacency = vec![Vec::new(); size];
    for (v, nbrs) in adjacency.iter_mut().enumerate() {
        let deg = edges
            .iter()
            .filter(|&&(a, b)| a == v || b == v)
            .count();
        nbrs.resize(deg, (usize::MAX, 0));
    }
    for (i, &(a, b)) in edges.iter().enumerate() {
        let (pa, pb) = edge_port[i];
        adjacency[a][pa as usize] = (b, pb);
        adjacency[b][pb as usize] = (a, pa);
    }
    PortGraph::new(adjacency).expect("constructed port numbering must be valid")
}

/// Every distinct port numbering of the given labeled edge set.
fn all_port_numberings(size: usize, edges: &[(usize, usize)]) -> Vec<PortGraph> {
    let inc = incident_lists(size, edges);
    // For each node, all assignments of ports 0..deg-1 to its incident edges.
    let per_node: Vec<Vec<Vec<u16>>> = inc
        .iter()
        .map(|es| permutations(es.len() as u16))
        .collect();
    let mut out = Vec::new();
    let mut choice = vec![0usize; size];
    loop {
        let mut edge_port = vec![(0u16, 0u16); edges.len()];
        for v in 0..size {
            let perm = &per_node[v][choice[v]];
            for (slot, &e) in inc[v].iter().enumerate() {
                let (a, _b) = edges[e];
                if a == v {
                    edge_port[e].0 = perm[slot];
                } else {
                    edge_port[e].1 = perm[slot];
                }
            }
        }
        out.push(graph_from_ports(size, edges, &edge_port));
        // Odometer increment.
        let mut v = 0;
        loop {
            if v == size {
                return out;
            }
            choice[v] += 1;
            if choice[v] < per_node[v].len() {
                break;
            }
            choice[v] = 0;
            v += 1;
        }
    }
}

fn permutations(n: u16) -> Vec<Vec<u16>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

fn random_port_numbering(size: usize, edges: &[(usize, usize)], rng: &mut ChaCha12Rng) -> PortGraph {
    let inc = incident_lists(size, edges);
    let mut edge_port = vec![(0u16, 0u16); edges.len()];
    for v in 0..size {
        let mut ports: Vec<u16> = (0..inc[v].len() as u16).collect();
        ports.shuffle(rng);
        for (slot, &e) in inc[v].iter().enumerate() {
            if edges[e].0 == v {
                edge_port[e].0 = ports[slot];
            } else {
                edge_port[e].1 = ports[slot];
            }
        }
    }
    graph_from_ports(size, edges, &edge_port)
}

/// One agent of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    /// Positive integer label; pairwise distinct across the instance.
    pub label: u64,
    pub start_node: usize,
    #[serde(default)]
    pub byzantine: bool,
    /// Adversary script; only meaningful when `byzantine` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<ScriptSpec>,
}

/// A full adversary-chosen initial configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub schema_version: u32,
    pub graph: PortGraph,
    pub agents: Vec<AgentSpec>,
    /// Adversary wake-ups: agent index -> round. Agents missing from the map
    /// are woken only by co-location with an awake agent.
    #[serde(default)]
    pub wake_schedule: BTreeMap<usize, u64>,
    /// Global knowledge value shared by all agents.
    pub gk: u32,
    /// Size bound `n` with `node_count <= n`, used to pick exploration
    /// sequences when running GROUP/MERGE directly.
    pub size_bound: usize,
}

impl Instance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn good_agents(&self) -> impl Iterator<Item = (usize, &AgentSpec)> {
        self.agents.iter().enumerate().filter(|(_, a)| !a.byzantine)
    }
}

/// A violated instance invariant found by [`validate_instance`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    BadSchemaVersion { found: u32, expected: u32 },
    GraphInvariant(String),
    LabelCollision { label: u64 },
    NonPositiveLabel { agent: usize },
    NoInitialWake,
    BadStartNode { agent: usize, start_node: usize },
    SizeBoundTooSmall { node_count: usize, size_bound: usize },
    WakeForUnknownAgent { agent: usize },
    ScriptOnGoodAgent { agent: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Checks all instance invariants, returning every violation found (empty
/// report iff the instance is valid).
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut report = Vec::new();
    if inst.schema_version != SCHEMA_VERSION {
        report.push(Violation::BadSchemaVersion { found: inst.schema_version, expected: SCHEMA_VERSION });
    }
    if let Err(e) = inst.graph.check() {
        report.push(Violation::GraphInvariant(e.to_string()));
    }
    let n = inst.graph.node_count();
    let mut seen = BTreeMap::new();
    for (idx, a) in inst.agents.iter().enumerate() {
        if a.label == 0 {
            report.push(Violation::NonPositiveLabel { agent: idx });
        }
        if let Some(&_prev) = seen.get(&a.label) {
            report.push(Violation::LabelCollision { label: a.label });
        }
        seen.insert(a.label, idx);
        if a.start_node >= n {
            report.push(Violation::BadStartNode { agent: idx, start_node: a.start_node });
        }
        if !a.byzantine && a.script.is_some() {
            report.push(Violation::ScriptOnGoodAgent { agent: idx });
        }
    }
    if !inst
        .wake_schedule
        .keys()
        .any(|&i| inst.agents.get(i).map(|a| !a.byzantine).unwrap_or(false))
    {
        report.push(Violation::NoInitialWake);
    }
    for &i in inst.wake_schedule.keys() {
        if i >= inst.agents.len() {
            report.push(Violation::WakeForUnknownAgent { agent: i });
        }
    }
    if inst.size_bound < n {
        report.push(Violation::SizeBoundTooSmall { node_count: n, size_bound: inst.size_bound });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oriented_ring_ports() {
        // Port 0 at node k leads to (k+1) mod size with reciprocal port 1.
        let g = make_oriented_ring(4).unwrap();
        for k in 0..4 {
            assert_eq!(g.traverse(k, 0), ((k + 1) % 4, 1));
            assert_eq!(g.traverse(k, 1), ((k + 3) % 4, 0));
        }
    }

    #[test]
    fn oriented_ring_minimum_size() {
        let g = make_oriented_ring(3).unwrap();
        assert_eq!(g.node_count(), 3);
        assert!((0..3).all(|v| g.degree(v) == 2));
        assert!(make_oriented_ring(2).is_err());
    }

    #[test]
    fn ring_walk_returns_to_start() {
        // Traversing port 0 six times from any node of a 6-ring returns home.
        let g = make_oriented_ring(6).unwrap();
        for start in 0..6 {
            let mut v = start;
            for _ in 0..6 {
                v = g.traverse(v, 0).0;
            }
            assert_eq!(v, start);
        }
    }

    #[test]
    fn traversal_involution() {
        let corpus = enumerate_graphs(CORPUS_MAX_NODES, DEFAULT_CORPUS_SEED).unwrap();
        for g in corpus.graphs() {
            for v in 0..g.node_count() {
                for p in 0..g.degree(v) {
                    let (u, q) = g.traverse(v, p);
                    assert_eq!(g.traverse(u, q), (v, p), "edge traversal must be an involution");
                }
            }
        }
    }

    #[test]
    fn corpus_size_two_is_single_edge() {
        let corpus = enumerate_graphs(2, DEFAULT_CORPUS_SEED).unwrap();
        assert_eq!(corpus.graphs().len(), 1);
        let g = &corpus.graphs()[0];
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.traverse(0, 0), (1, 0));
        assert_eq!(g.traverse(1, 0), (0, 0));
    }

    #[test]
    fn corpus_size_three_contains_path_and_triangle_numberings() {
        let corpus = enumerate_graphs(3, DEFAULT_CORPUS_SEED).unwrap();
        // Oracle (exhaustive enumeration by hand): connected 3-node graphs are
        // 3 labeled paths and 1 triangle. A path's center node has 2! port
        // assignments (leaves are forced), so 3*2 = 6 path numberings; the
        // triangle has 2!^3 = 8. Plus the single 2-node graph: 15 total.
        assert_eq!(corpus.graphs().len(), 15);
        let paths = corpus
            .graphs()
            .iter()
            .filter(|g| g.node_count() == 3 && (0..3).map(|v| g.degree(v) as usize).sum::<usize>() == 4)
            .count();
        let triangles = corpus
            .graphs()
            .iter()
            .filter(|g| g.node_count() == 3 && (0..3).all(|v| g.degree(v) == 2))
            .count();
        assert_eq!(paths, 6);
        assert_eq!(triangles, 8);
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = enumerate_graphs(6, DEFAULT_CORPUS_SEED).unwrap();
        let b = enumerate_graphs(6, DEFAULT_CORPUS_SEED).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.graphs(), b.graphs());
        let c = enumerate_graphs(6, DEFAULT_CORPUS_SEED + 1).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn corpus_bound_enforced() {
        assert!(matches!(
            enumerate_graphs(7, DEFAULT_CORPUS_SEED),
            Err(GraphError::CorpusTooLarge { .. })
        ));
    }

    fn ring_instance() -> Instance {
        Instance {
            schema_version: SCHEMA_VERSION,
            graph: make_oriented_ring(4).unwrap(),
            agents: vec![
                AgentSpec { label: 1, start_node: 0, byzantine: false, script: None },
                AgentSpec { label: 2, start_node: 2, byzantine: false, script: None },
            ],
            wake_schedule: BTreeMap::from([(0, 0)]),
            gk: 1,
            size_bound: 4,
        }
    }

    #[test]
    fn valid_instance_has_empty_report() {
        assert_eq!(validate_instance(&ring_instance()), Vec::new());
    }

    #[test]
    fn duplicate_labels_reported() {
        let mut inst = ring_instance();
        inst.agents[1].label = 1;
        assert!(validate_instance(&inst).contains(&Violation::LabelCollision { label: 1 }));
    }

    #[test]
    fn missing_wake_reported() {
        let mut inst = ring_instance();
        inst.wake_schedule.clear();
        assert!(validate_instance(&inst).contains(&Violation::NoInitialWake));
    }

    #[test]
    fn instance_serialization_round_trips() {
        let inst = ring_instance();
        let json = inst.to_json();
        let back = Instance::from_json(&json).unwrap();
        assert_eq!(inst, back);
        assert_eq!(json, back.to_json());
    }
}
