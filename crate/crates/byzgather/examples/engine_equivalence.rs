//! The wait-compression contract: a compressed run must be byte-identical to
//! the literal round-by-round run. This example runs the same scenario both
//! ways with full tracing, compares every step record, and shows how many
//! agent-rounds the compressed engine skipped.
//!
//!     cargo run --example engine_equivalence

use std::collections::BTreeMap;

use byzgather::adversary::ScriptSpec;
use byzgather::behavior::Behavior;
use byzgather::engine::{run, RunConfig};
use byzgather::explo::provide_sequence;
use byzgather::graph::{
    enumerate_graphs, make_oriented_ring, AgentSpec, Instance, DEFAULT_CORPUS_SEED, SCHEMA_VERSION,
};
use byzgather::protocols::group::group_behavior;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = enumerate_graphs(4, DEFAULT_CORPUS_SEED)?;
    let seq = provide_sequence(4, &corpus)?;

    let instance = Instance {
        schema_version: SCHEMA_VERSION,
        graph: make_oriented_ring(4)?,
        agents: vec![
            AgentSpec { label: 3, start_node: 0, byzantine: false, script: None },
            AgentSpec { label: 8, start_node: 2, byzantine: false, script: None },
            AgentSpec {
                label: 99,
                start_node: 1,
                byzantine: true,
                script: Some(ScriptSpec::RandomWalk { seed: 17 }),
            },
        ],
        wake_schedule: BTreeMap::from([(0, 0), (1, 5)]),
        gk: 1,
        size_bound: 4,
    };
    let behaviors = |seq: &byzgather::explo::ExploSeq| -> Vec<Box<dyn Behavior>> {
        vec![
            group_behavior(3, seq.x_n(), 0, seq).unwrap(),
            group_behavior(8, seq.x_n(), 1, seq).unwrap(),
            byzgather::adversary::builtin_script(&ScriptSpec::RandomWalk { seed: 17 }, 99),
        ]
    };

    let horizon = 20_000;
    let fast = run(&instance, behaviors(&seq), &RunConfig::compressed(horizon).with_full_trace())?;
    let slow = run(&instance, behaviors(&seq), &RunConfig::uncompressed(horizon).with_full_trace())?;

    let fast_steps = fast.trace.expanded_steps();
    let slow_steps = slow.trace.expanded_steps();
    assert_eq!(fast_steps, slow_steps, "expanded traces are byte-identical");
    assert_eq!(fast.summary.agents, slow.summary.agents);

    println!("horizon: {horizon} rounds, traces identical: true");
    println!(
        "compressed engine executed {} rounds and skipped {} agent-rounds;",
        fast.summary.executed_rounds, fast.summary.skipped_agent_rounds
    );
    println!(
        "uncompressed engine executed {} rounds.",
        slow.summary.executed_rounds
    );
    println!("compressed trace digest:   {}", fast.summary.trace_digest);
    println!("uncompressed trace digest: {}", slow.summary.trace_digest);
    Ok(())
}
