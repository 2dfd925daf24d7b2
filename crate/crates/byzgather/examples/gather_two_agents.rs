//! The full gathering protocol, fault-free: two agents on the 4-ring with
//! staggered wake-ups run the complete iteration schedule — grouping,
//! merging, learning, checking — and declare gathering at one common round
//! and node, tens of billions of rounds in, in seconds of wall time thanks
//! to wait-compression.
//!
//!     cargo run --release --example gather_two_agents

use std::collections::BTreeMap;

use byzgather::engine::{run, RunConfig};
use byzgather::explo::provide_sequence;
use byzgather::graph::{
    enumerate_graphs, make_oriented_ring, AgentSpec, Instance, DEFAULT_CORPUS_SEED, SCHEMA_VERSION,
};
use byzgather::protocols::gather::gather_behavior;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = enumerate_graphs(4, DEFAULT_CORPUS_SEED)?;
    let seq = provide_sequence(4, &corpus)?;

    let instance = Instance {
        schema_version: SCHEMA_VERSION,
        graph: make_oriented_ring(4)?,
        agents: vec![
            AgentSpec { label: 1, start_node: 0, byzantine: false, script: None },
            AgentSpec { label: 2, start_node: 2, byzantine: false, script: None },
        ],
        wake_schedule: BTreeMap::from([(0, 0), (1, 3)]),
        gk: 1,
        size_bound: 4,
    };
    let behaviors = vec![
        gather_behavior(1, 1, &seq)?,
        gather_behavior(2, 1, &seq)?,
    ];

    let t0 = std::time::Instant::now();
    let result = run(&instance, behaviors, &RunConfig::compressed(1 << 40))?;
    let elapsed = t0.elapsed();

    let (round, node) = result
        .summary
        .common_declare()
        .expect("a fault-free strong team declares together");
    println!("both agents declared gathering at round {round}, node {node}");
    println!(
        "rounds simulated: {} | rounds executed: {} | agent-rounds skipped: {}",
        result.summary.final_round,
        result.summary.executed_rounds,
        result.summary.skipped_agent_rounds
    );
    println!("wall time: {elapsed:.1?}");
    println!("trace digest: {}", result.summary.trace_digest);
    Ok(())
}
