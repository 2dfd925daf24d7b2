//! Batch experiments: declare a matrix of graphs, fault counts, wake
//! policies, and adversary scripts; run every cell in a worker pool; and
//! aggregate the pass/fail verdicts into CSV and JSON.
//!
//!     cargo run --release --example suite_matrix

use byzgather::adversary::ScriptSpec;
use byzgather::suite::{
    run_suite, GraphSel, Invariant, Protocol, SuiteSpec, WakeSel, SUITE_SCHEMA_VERSION,
};

fn main() {
    let spec = SuiteSpec {
        schema_version: SUITE_SCHEMA_VERSION,
        protocol: Protocol::Merge,
        graphs: vec![
            GraphSel::Ring { size: 4 },
            GraphSel::Ring { size: 5 },
            GraphSel::Corpus { size: 5, index: 3 },
        ],
        byzantine_counts: vec![0, 1],
        good_counts: vec![6],
        wakes: vec![WakeSel::Simultaneous, WakeSel::Staggered { step: 1 }],
        scripts: vec![ScriptSpec::Inert, ScriptSpec::LabelForger { target_label: 1 }],
        invariants: vec![Invariant::CommonTermination { min_agents: 6 }],
        horizon: 1 << 24,
        seed: 2024,
    };
    println!("suite file:\n{}\n", spec.to_json());

    let report = run_suite(&spec, 4);
    println!("{}", report.to_csv());
    println!(
        "{} cells: {} passed, {} failed",
        report.cells.len(),
        report.passed,
        report.failed
    );
    assert!(report.all_passed(), "every cell of this matrix holds its invariant");
}
