//! Fools the full gathering protocol on the oriented-ring family: records a
//! subject's run on the 4-ring, replays it with Byzantine shadows on the
//! 256-ring, and shows the subject declaring while 1377 good agents wait on
//! the far side.
//!
//!     cargo run --release --example fooling_ring

use byzgather::explo::provide_sequence;
use byzgather::graph::{enumerate_graphs, DEFAULT_CORPUS_SEED};
use byzgather::lowerbound::{fooling_check, knowledge_size_table};
use byzgather::protocols::gather::gather_behavior;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("global-knowledge size by graph size:");
    for row in knowledge_size_table(&[4, 16, 1 << 32]) {
        println!("  n = {:>10}  gk = {}  encoding bits = {}", row.n, row.gk, row.bits);
    }
    println!();

    // The same behavior factory drives both family members: global knowledge
    // gk = 1 means "graphs of at most 4 nodes", which is correct on the small
    // ring and wrong on the big one.
    let corpus = enumerate_graphs(4, DEFAULT_CORPUS_SEED)?;
    let seq = provide_sequence(4, &corpus)?;
    let alg = move |label: u64, gk: u32| gather_behavior(label, gk, &seq).expect("valid knowledge");

    let t0 = std::time::Instant::now();
    let report = fooling_check(&alg, 1, 0, 1, 1)?;
    println!("{report}");
    println!("(wall time: {:.1?})", t0.elapsed());
    if !report.passes() {
        return Err("the protocol was not fooled".into());
    }
    Ok(())
}
