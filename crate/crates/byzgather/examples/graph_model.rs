//! Port-numbered anonymous graphs and problem instances: builds an oriented
//! ring and a seeded corpus, shows local port traversal, and round-trips an
//! instance file through JSON.
//!
//!     cargo run --example graph_model

use std::collections::BTreeMap;

use byzgather::graph::{
    enumerate_graphs, make_oriented_ring, validate_instance, AgentSpec, Instance,
    DEFAULT_CORPUS_SEED, SCHEMA_VERSION,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Nodes are anonymous; an agent only ever sees local port numbers. On the
    // oriented ring, port 0 is clockwise everywhere and port 1 anticlockwise.
    let ring = make_oriented_ring(6)?;
    let mut at = 0;
    print!("clockwise walk from an arbitrary node:");
    for _ in 0..6 {
        let (next, arrival_port) = ring.traverse(at, 0);
        print!(" ->(in {arrival_port}) {next}");
        at = next;
    }
    println!();

    // The corpus: a deterministic enumeration of small connected graphs plus
    // seeded samples, shared by sequence search and the test suites.
    let corpus = enumerate_graphs(6, DEFAULT_CORPUS_SEED)?;
    println!(
        "corpus: {} graphs with at most {} nodes, digest {}",
        corpus.graphs().len(),
        corpus.max_nodes(),
        corpus.digest_hex()
    );

    // An instance bundles graph, agents, wake schedule, and the shared
    // global knowledge (gk encodes the size bound 2^(2^gk)).
    let instance = Instance {
        schema_version: SCHEMA_VERSION,
        graph: ring,
        agents: vec![
            AgentSpec { label: 5, start_node: 0, byzantine: false, script: None },
            AgentSpec { label: 9, start_node: 3, byzantine: false, script: None },
        ],
        wake_schedule: BTreeMap::from([(0, 0), (1, 4)]),
        gk: 2,
        size_bound: 16,
    };
    let violations = validate_instance(&instance);
    println!("instance valid: {} (violations: {violations:?})", violations.is_empty());

    let json = instance.to_json();
    let back = Instance::from_json(&json)?;
    println!("JSON round-trip stable: {}", back.to_json() == json);
    println!("serialized instance:\n{json}");
    Ok(())
}
