//! The merging procedure: co-started agents elect the best census list,
//! explore to collect stragglers, and finish together at one node. Here two
//! clusters start a few rounds apart and still end merged.
//!
//!     cargo run --example merge_census

use std::collections::BTreeMap;

use byzgather::engine::{run, RunConfig, Termination};
use byzgather::explo::provide_sequence;
use byzgather::graph::{
    enumerate_graphs, make_oriented_ring, AgentSpec, Instance, DEFAULT_CORPUS_SEED, SCHEMA_VERSION,
};
use byzgather::protocols::merge::{merge_behavior, merge_time_bound};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = enumerate_graphs(5, DEFAULT_CORPUS_SEED)?;
    let seq = provide_sequence(5, &corpus)?;
    let t = seq.x_n();

    // Two clusters on a 5-ring: labels {1, 2} at node 0 waking at round 0,
    // labels {3, 4} at node 2 waking three rounds later.
    let instance = Instance {
        schema_version: SCHEMA_VERSION,
        graph: make_oriented_ring(5)?,
        agents: vec![
            AgentSpec { label: 1, start_node: 0, byzantine: false, script: None },
            AgentSpec { label: 2, start_node: 0, byzantine: false, script: None },
            AgentSpec { label: 3, start_node: 2, byzantine: false, script: None },
            AgentSpec { label: 4, start_node: 2, byzantine: false, script: None },
        ],
        wake_schedule: BTreeMap::from([(0, 0), (1, 0), (2, 3), (3, 3)]),
        gk: 1,
        size_bound: 5,
    };
    let behaviors = vec![
        merge_behavior(1, t, &seq)?,
        merge_behavior(2, t, &seq)?,
        merge_behavior(3, t, &seq)?,
        merge_behavior(4, t, &seq)?,
    ];

    let bound = merge_time_bound(t, seq.x_n())?;
    let result = run(&instance, behaviors, &RunConfig::compressed(4 * bound))?;
    let mut ends = Vec::new();
    for a in &result.summary.agents {
        println!("  label {}: {:?}", a.label, a.termination);
        if let Termination::Completed { round, node } = a.termination {
            ends.push((round, node));
        }
    }
    assert_eq!(ends.len(), 4);
    assert!(ends.windows(2).all(|w| w[0] == w[1]), "all four merge at one (round, node)");
    println!("merged at round {}, node {} (bound {bound})", ends[0].0, ends[0].1);
    Ok(())
}
