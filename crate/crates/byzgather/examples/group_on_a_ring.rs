//! The grouping procedure: two agents on opposite ends of a ring, one in
//! each role bin, find each other and exit grouped at a common round and
//! node — within the procedure's round bound.
//!
//!     cargo run --release --example group_on_a_ring

use std::collections::BTreeMap;

use byzgather::engine::{run, RunConfig, Termination};
use byzgather::explo::provide_sequence;
use byzgather::graph::{
    enumerate_graphs, make_oriented_ring, AgentSpec, Instance, DEFAULT_CORPUS_SEED, SCHEMA_VERSION,
};
use byzgather::protocols::group::{group_behavior, group_time_bound};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = enumerate_graphs(4, DEFAULT_CORPUS_SEED)?;
    let seq = provide_sequence(4, &corpus)?;
    let t = seq.x_n(); // wake spread bound

    let instance = Instance {
        schema_version: SCHEMA_VERSION,
        graph: make_oriented_ring(4)?,
        agents: vec![
            AgentSpec { label: 1, start_node: 0, byzantine: false, script: None },
            AgentSpec { label: 2, start_node: 2, byzantine: false, script: None },
        ],
        wake_schedule: BTreeMap::from([(0, 0), (1, 0)]),
        gk: 1,
        size_bound: 4,
    };

    // Bin 0 searches; bin 1 follows. Mixed bins are what makes a group form.
    let behaviors = vec![
        group_behavior(1, t, 0, &seq)?,
        group_behavior(2, t, 1, &seq)?,
    ];

    let bound = group_time_bound(t, 4, seq.x_n())?;
    let result = run(&instance, behaviors, &RunConfig::compressed(4 * bound))?;
    println!(
        "simulated {} rounds ({} executed, {} skipped inside frozen spans)",
        result.summary.final_round,
        result.summary.executed_rounds,
        result.summary.skipped_agent_rounds
    );
    for a in &result.summary.agents {
        println!("  label {}: {:?}", a.label, a.termination);
    }

    let ends: Vec<(u64, u32)> = result
        .summary
        .agents
        .iter()
        .filter_map(|a| match a.termination {
            Termination::Completed { round, node } => Some((round, node)),
            _ => None,
        })
        .collect();
    assert_eq!(ends.len(), 2, "both agents complete the procedure");
    assert_eq!(ends[0], ends[1], "grouped: common exit round and node");
    assert!(ends[0].0 < bound, "within the procedure's round bound {bound}");
    println!("grouped at round {}, node {} (bound {bound})", ends[0].0, ends[0].1);
    Ok(())
}
