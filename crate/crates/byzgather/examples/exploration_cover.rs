//! Shared exploration sequences: every agent applies the same fixed term
//! sequence, so a sequence must cover every corpus graph from every start
//! node. This example verifies the cover property and demonstrates the
//! backtrack that returns a walker to its start node.
//!
//!     cargo run --example exploration_cover

use byzgather::explo::{provide_sequence, simulate_walk};
use byzgather::graph::{enumerate_graphs, DEFAULT_CORPUS_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = enumerate_graphs(6, DEFAULT_CORPUS_SEED)?;
    for bound in 2..=6 {
        let seq = provide_sequence(bound, &corpus)?;
        let mut pairs = 0;
        let mut covered = 0;
        for g in corpus.graphs_up_to(bound) {
            for start in 0..g.node_count() {
                pairs += 1;
                let mut seen = vec![false; g.node_count()];
                for v in simulate_walk(g, start, seq.terms()) {
                    seen[v] = true;
                }
                if seen.iter().all(|&s| s) {
                    covered += 1;
                }
            }
        }
        println!(
            "bound {bound}: X_n = {:>3}, covers {covered}/{pairs} (graph, start) pairs",
            seq.x_n()
        );
        assert_eq!(covered, pairs, "the provider only returns covering sequences");
    }
    Ok(())
}
