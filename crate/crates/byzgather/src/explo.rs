//! The shared exploration primitive and imperfect maps.
//!
//! All agents steer by the same fixed sequence of integers: entering a node
//! of degree `d` through port `p`, with current term `x`, they exit through
//! port `(p + x) mod d`. A sequence with bound `n` is *covering* when,
//! started anywhere on any verification-corpus graph of at most `n` nodes, it
//! visits every node. `X_n` denotes the execution time of one exploration:
//! the number of traversals plus one.
//!
//! Constructive universal exploration sequences have impractical constants,
//! so the provider *searches* for corpus-verified sequences instead: for each
//! bound, candidate term lists are drawn from a fixed pseudo-random stream
//! keyed by the corpus digest, sweeping lengths shortest-first until coverage
//! holds. Sweeps for successive bounds start at the previous bound's found
//! length, so `X_n` is monotone non-decreasing in `n`. Results are cached
//! in-process and, when `BYZGATHER_CACHE_DIR` is set, on disk keyed by
//! (bound, corpus digest).

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Corpus, PortGraph};

/// Hard budget on sequence length during search.
pub const SEARCH_MAX_TERMS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Searched,
    Oracle,
    UserSupplied,
}

/// A fixed exploration sequence, identical for all agents given the bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExploSeq {
    bound: usize,
    terms: Arc<[u32]>,
    provenance: Provenance,
}

impl ExploSeq {
    pub fn bound(&self) -> usize {
        self.bound
    }

    /// The terms x1..xk; `k = X_n - 1` traversals.
    pub fn terms(&self) -> &[u32] {
        &self.terms
    }

    /// Execution time `X_n` = traversal count + 1.
    pub fn x_n(&self) -> u64 {
        self.terms.len() as u64 + 1
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Wraps a user-supplied term list after verifying coverage against the
    /// corpus.
    pub fn user_supplied(bound: usize, terms: Vec<u32>, corpus: &Corpus) -> Result<Self, ExploError> {
        let seq = ExploSeq { bound, terms: terms.into(), provenance: Provenance::UserSupplied };
        if !covers_corpus(&seq.terms, bound, corpus) {
            return Err(ExploError::NotCovering { bound });
        }
        Ok(seq)
    }
}

#[derive(Debug, Error)]
pub enum ExploError {
    #[error("no covering sequence found for bound {bound} within {budget} terms")]
    NoSequenceFound { bound: usize, budget: usize },
    #[error("supplied sequence does not cover the corpus at bound {bound}")]
    NotCovering { bound: usize },
    #[error("bound must be at least 2, got {0}")]
    BadBound(usize),
}

/// The steering rule: exit port from entry port `p`, degree `d`, term `x`.
///
/// Convention: at the starting node of an exploration, `p = 0`.
pub fn explo_step(entry_port: u16, degree: u16, term: u32) -> u16 {
    assert!(degree > 0, "isolated node cannot occur on a connected graph");
    assert!(entry_port < degree, "entry port {entry_port} out of range for degree {degree}");
    ((entry_port as u32 + term) % degree as u32) as u16
}

/// Simulates the sequence on `graph` from `start`; returns the node visited
/// at each step (positions 1..=k+1, so `out[0] == start`).
pub fn simulate_walk(graph: &PortGraph, start: usize, terms: &[u32]) -> Vec<usize> {
    let mut path = Vec::with_capacity(terms.len() + 1);
    let mut node = start;
    let mut entry: u16 = 0;
    path.push(node);
    for &x in terms {
        let exit = explo_step(entry, graph.degree(node), x);
        let (next, in_port) = graph.traverse(node, exit);
        node = next;
        entry = in_port;
        path.push(node);
    }
    path
}

/// Whether `terms` visits every node of every corpus graph of size at most
/// `bound`, from every start node.
pub fn covers_corpus(terms: &[u32], bound: usize, corpus: &Corpus) -> bool {
    corpus.graphs_up_to(bound).all(|g| {
        (0..g.node_count()).all(|start| {
            let mut visited = vec![false; g.node_count()];
            for v in simulate_walk(g, start, terms) {
                visited[v] = true;
            }
            visited.into_iter().all(|b| b)
        })
    })
}

type CacheKey = (usize, [u8; 32]);

fn process_cache() -> &'static Mutex<HashMap<CacheKey, Arc<[u32]>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<[u32]>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    corpus_digest: String,
    /// bound -> terms
    sequences: HashMap<usize, Vec<u32>>,
}

fn cache_path(corpus: &Corpus) -> Option<PathBuf> {
    let dir: PathBuf = std::env::var_os("BYZGATHER_CACHE_DIR")?.into();
    Some(dir.join(format!("explo-cache-{}.json", corpus.digest_hex())))
}

fn load_from_file(bound: usize, corpus: &Corpus) -> Option<Vec<u32>> {
    let path = cache_path(corpus)?;
    let data = std::fs::read_to_string(path).ok()?;
    let file: CacheFile = serde_json::from_str(&data).ok()?;
    if file.corpus_digest != corpus.digest_hex() {
        return None;
    }
    let terms = file.sequences.get(&bound)?.clone();
    covers_corpus(&terms, bound, corpus).then_some(terms)
}

fn store_to_file(bound: usize, terms: &[u32], corpus: &Corpus) {
    let Some(path) = cache_path(corpus) else { return };
    let mut file = match std::fs::read_to_string(&path)
        .ok()
        .and_then(|d| serde_json::from_str::<CacheFile>(&d).ok())
    {
        Some(f) if f.corpus_digest == corpus.digest_hex() => f,
        _ => CacheFile { corpus_digest: corpus.digest_hex(), sequences: HashMap::new() },
    };
    file.sequences.insert(bound, terms.to_vec());
    if let Some(parent) = path.parent() {
        let _ = std::fs::create_dir_all(parent);
    }
    if let Ok(json) = serde_json::to_string_pretty(&file) {
        let _ = std::fs::write(path, json);
    }
}

/// Returns a covering sequence for `bound`, searching (and caching) if
/// needed. Deterministic for a fixed (bound, corpus).
pub fn provide_sequence(bound: usize, corpus: &Corpus) -> Result<ExploSeq, ExploError> {
    if bound < 2 {
        return Err(ExploError::BadBound(bound));
    }
    let key = (bound, *corpus.digest());
    if let Some(terms) = process_cache().lock().unwrap().get(&key).cloned() {
        return Ok(ExploSeq { bound, terms, provenance: Provenance::Searched });
    }
    if let Some(terms) = load_from_file(bound, corpus) {
        let terms: Arc<[u32]> = terms.into();
        process_cache().lock().unwrap().insert(key, terms.clone());
        return Ok(ExploSeq { bound, terms, provenance: Provenance::Searched });
    }
    let terms = search_sequence(bound, corpus)?;
    store_to_file(bound, &terms, corpus);
    let terms: Arc<[u32]> = terms.into();
    process_cache().lock().unwrap().insert(key, terms.clone());
    Ok(ExploSeq { bound, terms, provenance: Provenance::Searched })
}

/// Deletion positions tried per shrink round and hill-climbing mutations per
/// deletion. Sequence length feeds the protocols' timing polynomials with
/// high degree, so investing search effort in short sequences pays off many
/// times over at simulation time.
const SHRINK_DELETE_TRIES: usize = 24;
const CLIMB_STEPS: usize = 4_000;

/// Coverage score of a candidate: total distinct nodes visited, summed over
/// every (graph, start) pair of the corpus at `bound`. Full coverage is
/// exactly [`max_cover_score`].
fn cover_score(terms: &[u32], bound: usize, corpus: &Corpus) -> usize {
    corpus
        .graphs_up_to(bound)
        .map(|g| {
            (0..g.node_count())
                .map(|start| {
                    let mut visited = vec![false; g.node_count()];
                    for v in simulate_walk(g, start, terms) {
                        visited[v] = true;
                    }
                    visited.into_iter().filter(|&b| b).count()
                })
                .sum::<usize>()
        })
        .sum()
}

fn max_cover_score(bound: usize, corpus: &Corpus) -> usize {
    corpus.graphs_up_to(bound).map(|g| g.node_count() * g.node_count()).sum()
}

/// Hill-climbs `cand` toward full coverage by random single-term mutations
/// (plateau moves accepted); returns true when full coverage is reached.
fn climb(cand: &mut Vec<u32>, bound: usize, corpus: &Corpus, rng: &mut ChaCha12Rng) -> bool {
    let target = max_cover_score(bound, corpus);
    let mut score = cover_score(cand, bound, corpus);
    if score == target {
        return true;
    }
    if cand.is_empty() {
        return false;
    }
    let span = bound.max(2) as u32;
    for _ in 0..CLIMB_STEPS {
        let pos = rng.gen_range(0..cand.len());
        let old = cand[pos];
        let new = rng.gen_range(0..span);
        if new == old {
            continue;
        }
        cand[pos] = new;
        let s = cover_score(cand, bound, corpus);
        if s >= score {
            score = s;
            if score == target {
                return true;
            }
        } else {
            cand[pos] = old;
        }
    }
    false
}

/// Searches a short covering sequence: for each bound b = 2..=bound in
/// order, grow the previous bound's sequence with random terms until it
/// covers all corpus graphs of size <= b, then repeatedly try to drop one
/// term and hill-climb coverage back. The shrink never goes below the
/// previous bound's length, which makes X_n monotone non-decreasing in n by
/// construction; one fixed pseudo-random stream keyed by the corpus digest
/// makes the result deterministic per (bound, corpus).
fn search_sequence(bound: usize, corpus: &Corpus) -> Result<Vec<u32>, ExploError> {
    let mut rng = ChaCha12Rng::from_seed(*corpus.digest());
    let mut terms: Vec<u32> = Vec::new();
    let mut floor = 0usize;
    for b in 2..=bound {
        if corpus.graphs_up_to(b).next().is_none() {
            continue;
        }
        // Grow phase: random extension until the corpus at this bound is
        // covered.
        while !covers_corpus(&terms, b, corpus) {
            if terms.len() >= SEARCH_MAX_TERMS {
                return Err(ExploError::NoSequenceFound { bound: b, budget: SEARCH_MAX_TERMS });
            }
            terms.push(rng.gen_range(0..b.max(2) as u32));
        }
        // Shrink phase: drop a term, repair coverage by hill-climbing.
        'shrink: while terms.len() > floor {
            for _ in 0..SHRINK_DELETE_TRIES {
                let mut cand = terms.clone();
                cand.remove(rng.gen_range(0..cand.len()));
                if climb(&mut cand, b, corpus, &mut rng) {
                    terms = cand;
                    continue 'shrink;
                }
            }
            break;
        }
        floor = terms.len();
    }
    Ok(terms)
}

/// An imperfect map: the ordered label lists recorded at each exploration
/// step. Byzantine claims are recorded verbatim — that is what makes the map
/// imperfect.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImperfectMap {
    /// `lists[j-1]` is the set of labels recorded at step j, sorted,
    /// pairwise distinct. Length exactly `X_n`.
    lists: Vec<Vec<u64>>,
    bound: usize,
}

impl ImperfectMap {
    /// Creates a map from raw per-step label records (deduplicated and
    /// sorted per list). `lists.len()` must equal `X_n` for the bound.
    pub fn new(mut lists: Vec<Vec<u64>>, bound: usize) -> Self {
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        ImperfectMap { lists, bound }
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// 1-based list access (step j).
    pub fn list(&self, j: usize) -> &[u64] {
        &self.lists[j - 1]
    }

    /// A map is useful when it contains a non-empty list.
    pub fn is_useful(&self) -> bool {
        self.lists.iter().any(|l| !l.is_empty())
    }

    /// The index of a useful map: the smallest step j whose list contains
    /// the smallest label occurring anywhere in the map. `None` when not
    /// useful.
    pub fn index(&self) -> Option<usize> {
        let min = self.lists.iter().filter_map(|l| l.first()).min().copied()?;
        self.lists
            .iter()
            .position(|l| l.binary_search(&min).is_ok())
            .map(|p| p + 1)
    }

    /// Removes `label` from the list at step j (1-based); no-op if absent.
    pub fn remove(&mut self, j: usize, label: u64) {
        let l = &mut self.lists[j - 1];
        if let Ok(pos) = l.binary_search(&label) {
            l.remove(pos);
        }
    }

    /// Smallest label of the list at step j, if any.
    pub fn min_of_list(&self, j: usize) -> Option<u64> {
        self.lists[j - 1].first().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_graphs, make_oriented_ring, DEFAULT_CORPUS_SEED};

    fn corpus6() -> Corpus {
        enumerate_graphs(6, DEFAULT_CORPUS_SEED).unwrap()
    }

    #[test]
    fn explo_step_formula() {
        assert_eq!(explo_step(1, 3, 1), 2);
        assert_eq!(explo_step(0, 1, 0), 0);
        assert_eq!(explo_step(2, 3, 2), 1);
    }

    #[test]
    fn single_edge_needs_one_term() {
        let corpus = enumerate_graphs(2, DEFAULT_CORPUS_SEED).unwrap();
        assert!(covers_corpus(&[0], 2, &corpus));
        assert!(!covers_corpus(&[], 2, &corpus));
    }

    #[test]
    fn three_ones_cover_the_oriented_four_ring() {
        // Exiting by entry+1 keeps advancing one direction on a ring (term 0
        // would bounce straight back), so three steps cover a 4-ring from any
        // start.
        let ring = make_oriented_ring(4).unwrap();
        for start in 0..4 {
            let path = simulate_walk(&ring, start, &[1, 1, 1]);
            let mut seen: Vec<usize> = path.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), 4, "start {start} path {path:?}");
        }
    }

    #[test]
    fn provided_sequences_cover_their_corpus() {
        let corpus = corpus6();
        for bound in 2..=6 {
            let seq = provide_sequence(bound, &corpus).unwrap();
            assert!(covers_corpus(seq.terms(), bound, &corpus), "bound {bound}");
        }
    }

    #[test]
    fn x_n_monotone_in_bound() {
        let corpus = corpus6();
        let mut prev = 0;
        for bound in 2..=6 {
            let x = provide_sequence(bound, &corpus).unwrap().x_n();
            assert!(x >= prev, "X_n not monotone at bound {bound}");
            prev = x;
        }
    }

    #[test]
    fn provider_is_deterministic() {
        let corpus = corpus6();
        let a = provide_sequence(6, &corpus).unwrap();
        let b = provide_sequence(6, &corpus).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_above_corpus_max_reuses_largest(){
        let corpus = corpus6();
        let six = provide_sequence(6, &corpus).unwrap();
        let sixteen = provide_sequence(16, &corpus).unwrap();
        assert_eq!(six.terms(), sixteen.terms());
    }

    #[test]
    fn map_usefulness_and_index() {
        let empty = ImperfectMap::new(vec![vec![], vec![], vec![]], 3);
        assert!(!empty.is_useful());
        assert_eq!(empty.index(), None);

        let m = ImperfectMap::new(vec![vec![5], vec![], vec![9, 2]], 3);
        assert!(m.is_useful());
        assert_eq!(m.index(), Some(3));

        // Minimum appearing twice: earliest step wins.
        let m = ImperfectMap::new(vec![vec![], vec![1, 7], vec![], vec![1]], 4);
        assert_eq!(m.index(), Some(2));
    }

    #[test]
    fn map_remove_and_min() {
        let mut m = ImperfectMap::new(vec![vec![3, 1, 3]], 2);
        assert_eq!(m.list(1), &[1, 3]);
        assert_eq!(m.min_of_list(1), Some(1));
        m.remove(1, 1);
        assert_eq!(m.min_of_list(1), Some(3));
        m.remove(1, 3);
        assert!(!m.is_useful());
    }

    #[test]
    fn user_supplied_sequences_are_verified() {
        let corpus = enumerate_graphs(2, DEFAULT_CORPUS_SEED).unwrap();
        assert!(ExploSeq::user_supplied(2, vec![0], &corpus).is_ok());
        assert!(matches!(
            ExploSeq::user_supplied(2, vec![], &corpus),
            Err(ExploError::NotCovering { .. })
        ));
    }
}
