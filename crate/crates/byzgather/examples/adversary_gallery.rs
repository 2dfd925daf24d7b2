//! The scripted adversaries: each builtin Byzantine script tries to derail a
//! strong team of good agents running the full gathering protocol on the
//! 4-ring. Every attempt fails — the team declares together and nobody
//! declares prematurely.
//!
//!     cargo run --release --example adversary_gallery

use std::collections::BTreeMap;

use byzgather::adversary::{builtin_script, ScriptSpec};
use byzgather::behavior::Behavior;
use byzgather::engine::{run, RunConfig};
use byzgather::explo::provide_sequence;
use byzgather::graph::{
    enumerate_graphs, make_oriented_ring, AgentSpec, Instance, DEFAULT_CORPUS_SEED, SCHEMA_VERSION,
};
use byzgather::protocols::gather::{gather_behavior, strong_team_min};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = enumerate_graphs(4, DEFAULT_CORPUS_SEED)?;
    let seq = provide_sequence(4, &corpus)?;
    let goods = strong_team_min(1); // 13: enough to tolerate one Byzantine
    println!("{goods} good agents vs 1 Byzantine, per script:");

    let scripts = [
        ScriptSpec::Inert,
        ScriptSpec::RandomWalk { seed: 0xB0B },
        ScriptSpec::LabelForger { target_label: 1 },
        ScriptSpec::StateMimic { state: "Optimist".into(), duration: 0 },
        ScriptSpec::OptimistSpoofer,
    ];

    for script in scripts {
        let mut agents = Vec::new();
        let mut wake_schedule = BTreeMap::new();
        for label in 1..=goods {
            agents.push(AgentSpec {
                label,
                start_node: (label as usize) % 4,
                byzantine: false,
                script: None,
            });
            wake_schedule.insert(label as usize - 1, 0);
        }
        agents.push(AgentSpec {
            label: 99,
            start_node: 1,
            byzantine: true,
            script: Some(script.clone()),
        });
        let instance = Instance {
            schema_version: SCHEMA_VERSION,
            graph: make_oriented_ring(4)?,
            agents,
            wake_schedule,
            gk: 1,
            size_bound: 4,
        };
        let behaviors: Vec<Box<dyn Behavior>> = instance
            .agents
            .iter()
            .map(|a| {
                if a.byzantine {
                    builtin_script(a.script.as_ref().unwrap(), a.label)
                } else {
                    gather_behavior(a.label, 1, &seq).unwrap()
                }
            })
            .collect();

        let t0 = std::time::Instant::now();
        let result = run(&instance, behaviors, &RunConfig::compressed(1 << 40))?;
        let declared = result.summary.common_declare();
        let premature = result.summary.premature_declares();
        println!(
            "  {script:?}: common declare {declared:?}, premature {premature:?} ({:.1?})",
            t0.elapsed()
        );
        assert!(declared.is_some(), "the strong team still gathers");
        assert!(premature.is_empty(), "and nobody is tricked into an early declaration");
    }
    Ok(())
}
