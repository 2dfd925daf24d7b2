//! Acceptance criteria for the crate, one test per criterion. Each test
//! prints a single PASS line on success (visible with `--nocapture`); a
//! failing criterion fails its test.
//!
//! Run with: `cargo test --release --test acceptance -- --nocapture`

use std::collections::BTreeMap;

use byzgather::adversary::{builtin_script, ScriptSpec};
use byzgather::behavior::Behavior;
use byzgather::engine::{run, RunConfig, Termination};
use byzgather::explo::{provide_sequence, simulate_walk, ExploSeq};
use byzgather::graph::{
    enumerate_graphs, make_oriented_ring, AgentSpec, Instance, PortGraph, DEFAULT_CORPUS_SEED,
    SCHEMA_VERSION,
};
use byzgather::labels::{bitlen, check_separation, transform};
use byzgather::lowerbound::fooling_check;
use byzgather::protocols::gather::{
    f_tilde, gather_behavior, strong_team_min, team_bound, TimingProfile,
};
use byzgather::protocols::group::{group_behavior, GroupTiming};
use byzgather::protocols::merge::{merge_behavior, merge_time_bound};
use byzgather::suite::{
    run_suite, GraphSel, Invariant, Protocol, SuiteSpec, WakeSel, SUITE_SCHEMA_VERSION,
};

fn seq_for(bound: usize) -> ExploSeq {
    let corpus = enumerate_graphs(bound.min(6), DEFAULT_CORPUS_SEED).unwrap();
    provide_sequence(bound, &corpus).unwrap()
}

fn instance(
    graph: PortGraph,
    agents: Vec<AgentSpec>,
    wake_schedule: BTreeMap<usize, u64>,
    gk: u32,
    size_bound: usize,
) -> Instance {
    Instance { schema_version: SCHEMA_VERSION, graph, agents, wake_schedule, gk, size_bound }
}

fn good(label: u64, start_node: usize) -> AgentSpec {
    AgentSpec { label, start_node, byzantine: false, script: None }
}

/// GATHER liveness and safety without faults: a strong team of two on the
/// 4-ring declares at a common (round, node) for every wake offset, within
/// the protocol's polynomial round bound.
#[test]
fn criterion_1_gather_fault_free() {
    let seq = seq_for(4);
    let tp = TimingProfile::new(4, &seq).unwrap();
    // Round bound: 12·(4·len+8)·(X+G+M+1) for the shortest label's binary
    // length (len = 1 for label 1).
    let bound = 12 * (4 * bitlen(1) as u64 + 8) * (tp.t + 1);
    for offset in [0, 3, seq.x_n() - 1] {
        let inst = instance(
            make_oriented_ring(4).unwrap(),
            vec![good(1, 0), good(2, 2)],
            BTreeMap::from([(0, 0), (1, offset)]),
            1,
            4,
        );
        let behaviors: Vec<Box<dyn Behavior>> =
            vec![gather_behavior(1, 1, &seq).unwrap(), gather_behavior(2, 1, &seq).unwrap()];
        let t0 = std::time::Instant::now();
        let res = run(&inst, behaviors, &RunConfig::compressed(4 * bound)).unwrap();
        let (round, _node) = res
            .summary
            .common_declare()
            .unwrap_or_else(|| panic!("no common declare at wake offset {offset}"));
        assert!(round <= bound, "offset {offset}: declared at {round}, bound {bound}");
        assert!(t0.elapsed().as_secs() < 300, "compressed run must stay under 5 minutes");
    }
    println!("ACCEPTANCE 1 (gather, fault-free liveness + safety): PASS");
}

/// GATHER under every builtin Byzantine script: a 13-agent strong team plus
/// one Byzantine, on the 4-ring and two 6-node corpus graphs, simultaneous
/// and staggered wake-ups — every cell declares together, none prematurely.
#[test]
fn criterion_2_gather_byzantine_matrix() {
    // The two largest corpus graphs sit at the end of the enumeration.
    let count = enumerate_graphs(6, DEFAULT_CORPUS_SEED).unwrap().graphs().len();
    let spec = SuiteSpec {
        schema_version: SUITE_SCHEMA_VERSION,
        protocol: Protocol::Gather,
        graphs: vec![
            GraphSel::Ring { size: 4 },
            GraphSel::Corpus { size: 6, index: count - 1 },
            GraphSel::Corpus { size: 6, index: count - 2 },
        ],
        byzantine_counts: vec![1],
        good_counts: vec![strong_team_min(1) as usize],
        wakes: vec![WakeSel::Simultaneous, WakeSel::Staggered { step: 2 }],
        scripts: vec![
            ScriptSpec::Inert,
            ScriptSpec::RandomWalk { seed: 7 },
            ScriptSpec::LabelForger { target_label: 1 },
            ScriptSpec::StateMimic { state: "Optimist".into(), duration: 0 },
            ScriptSpec::OptimistSpoofer,
        ],
        invariants: vec![Invariant::CommonDeclare, Invariant::NoPrematureDeclare],
        horizon: 1 << 55,
        seed: 11,
    };
    let t0 = std::time::Instant::now();
    let report = run_suite(&spec, 2);
    assert_eq!(report.cells.len(), 30);
    assert!(
        report.all_passed(),
        "failing cells: {:#?}",
        report.cells.iter().filter(|c| !c.passed).collect::<Vec<_>>()
    );
    assert!(t0.elapsed().as_secs() < 3600, "matrix must finish within the hour");
    println!("ACCEPTANCE 2 (gather, Byzantine script matrix): PASS");
}

/// Grouping theorem: with good count (x−1)(f+1)+1 and mixed role bins, at
/// least x−f good agents exit at a common (round, node) within the
/// procedure's bound, across corpus graphs and adversary/wake variations.
#[test]
fn criterion_3_group_theorem() {
    let corpus = enumerate_graphs(6, DEFAULT_CORPUS_SEED).unwrap();
    for (x, f) in [(2u64, 0u64), (3, 1)] {
        let goods = (x - 1) * (f + 1) + 1;
        let mut cells = 0;
        // 10 variations: 5 corpus graphs × (2 wake/script variants).
        for (gi, graph) in corpus.graphs().iter().rev().take(5).enumerate() {
            let n = graph.node_count();
            let seq = provide_sequence(n, &corpus).unwrap();
            let t = seq.x_n();
            let tm = GroupTiming::new(t, n as u64, seq.x_n()).unwrap();
            for variant in 0..2u64 {
                cells += 1;
                let mut agents = Vec::new();
                let mut wake = BTreeMap::new();
                for i in 0..goods {
                    agents.push(good(i + 1, (gi + i as usize * 2) % n));
                    // Start spread stays within T.
                    wake.insert(i as usize, (variant * (i % t)) % t);
                }
                for b in 0..f {
                    agents.push(AgentSpec {
                        label: 100 + b,
                        start_node: (gi + 1) % n,
                        byzantine: true,
                        script: Some(if variant == 0 {
                            ScriptSpec::LabelForger { target_label: 1 }
                        } else {
                            ScriptSpec::RandomWalk { seed: 3 + b }
                        }),
                    });
                }
                let inst = instance(graph.clone(), agents, wake, 1, n);
                let behaviors: Vec<Box<dyn Behavior>> = inst
                    .agents
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        if a.byzantine {
                            builtin_script(a.script.as_ref().unwrap(), a.label)
                        } else {
                            group_behavior(a.label, t, (i % 2) as u8, &seq).unwrap()
                        }
                    })
                    .collect();
                let res =
                    run(&inst, behaviors, &RunConfig::compressed(8 * tm.time_bound())).unwrap();
                let mut sites: BTreeMap<(u64, u32), u64> = BTreeMap::new();
                for a in res.summary.agents.iter().filter(|a| !a.byzantine) {
                    if let Termination::Completed { round, node } = &a.termination {
                        *sites.entry((*round, *node)).or_default() += 1;
                    }
                }
                let (&(round, _), &count) =
                    sites.iter().max_by_key(|(_, &c)| c).expect("someone completes");
                assert!(
                    count >= x - f,
                    "(x={x}, f={f}) graph {gi} variant {variant}: best common exit {count} < {}",
                    x - f
                );
                let latest_wake = inst.wake_schedule.values().copied().max().unwrap();
                assert!(
                    round <= latest_wake + tm.time_bound(),
                    "(x={x}, f={f}) graph {gi} variant {variant}: exit at {round} past the bound"
                );
            }
        }
        assert_eq!(cells, 10);
    }
    println!("ACCEPTANCE 3 (group theorem): PASS");
}

/// Merging theorem: co-starting good agents with wake spread ≤ T all finish
/// at one (round, node) within 4T+6X−1 rounds of the first wake.
#[test]
fn criterion_4_merge_theorem() {
    let corpus = enumerate_graphs(6, DEFAULT_CORPUS_SEED).unwrap();
    for f in [0u64, 1] {
        let goods = 4 * f + 2;
        for graph in corpus.graphs().iter().rev().take(3) {
            let n = graph.node_count();
            let seq = provide_sequence(n, &corpus).unwrap();
            for t in [1, seq.x_n()] {
                let bound = merge_time_bound(t, seq.x_n()).unwrap();
                let mut agents = Vec::new();
                let mut wake = BTreeMap::new();
                for i in 0..goods {
                    agents.push(good(i + 1, 0));
                    wake.insert(i as usize, i % t.max(1));
                }
                for b in 0..f {
                    agents.push(AgentSpec {
                        label: 100 + b,
                        start_node: 1 % n,
                        byzantine: true,
                        script: Some(ScriptSpec::LabelForger { target_label: 2 }),
                    });
                }
                let inst = instance(graph.clone(), agents, wake, 1, n);
                let behaviors: Vec<Box<dyn Behavior>> = inst
                    .agents
                    .iter()
                    .map(|a| {
                        if a.byzantine {
                            builtin_script(a.script.as_ref().unwrap(), a.label)
                        } else {
                            merge_behavior(a.label, t, &seq).unwrap()
                        }
                    })
                    .collect();
                let res = run(&inst, behaviors, &RunConfig::compressed(8 * (t + bound))).unwrap();
                let ends: Vec<(u64, u32)> = res
                    .summary
                    .agents
                    .iter()
                    .filter(|a| !a.byzantine)
                    .map(|a| match &a.termination {
                        Termination::Completed { round, node } => (*round, *node),
                        other => panic!("f={f} T={t}: agent {} ended {other:?}", a.label),
                    })
                    .collect();
                assert!(
                    ends.windows(2).all(|w| w[0] == w[1]),
                    "f={f} T={t} ({n} nodes): split finish {ends:?}"
                );
                assert!(
                    ends[0].0 < t + bound,
                    "f={f} T={t}: finished at {} ≥ {}",
                    ends[0].0,
                    t + bound
                );
            }
        }
    }
    println!("ACCEPTANCE 4 (merge theorem): PASS");
}

/// Label separation, exhaustively: every pair a < b ≤ 63 has witness
/// positions i ≤ 2c+4 < j ≤ 4c+8 where the transformed labels differ.
#[test]
fn criterion_5_label_separation() {
    for a in 1u64..=62 {
        let c = bitlen(a);
        for b in (a + 1)..=63 {
            let (i, j) = check_separation(a, b).unwrap();
            assert!(i <= 2 * c + 4 && 2 * c + 4 < j && j <= 4 * c + 8);
            let (ta, tb) = (transform(a), transform(b));
            assert_ne!(ta.bit(i), tb.bit(i));
            assert_ne!(ta.bit(j), tb.bit(j));
        }
    }
    println!("ACCEPTANCE 5 (label separation, exhaustive to 63): PASS");
}

/// Arithmetic oracles: team thresholds against brute force, and the pinned
/// grouping schedule constants.
#[test]
fn criterion_6_arithmetic_oracles() {
    for p in 0u64..=10_000 {
        let brute = (0..=p).filter(|&y| team_bound(y) <= p).max();
        assert_eq!(f_tilde(p), brute, "f_tilde({p})");
    }
    for f in 0u64..=100 {
        assert_eq!(strong_team_min(f), 5 * f * f + 6 * f + 2);
    }
    let tm = GroupTiming::new(10, 4, 10).unwrap();
    assert_eq!((tm.s, tm.h, tm.step_len), (1601, 264253, 264353));
    println!("ACCEPTANCE 6 (arithmetic oracles): PASS");
}

/// Exploration cover: every provided sequence visits every node of every
/// corpus graph from every start, and the recorded backtrack always returns
/// to the start node.
#[test]
fn criterion_7_exploration_cover() {
    let corpus = enumerate_graphs(6, DEFAULT_CORPUS_SEED).unwrap();
    for bound in 2..=6 {
        let seq = provide_sequence(bound, &corpus).unwrap();
        for g in corpus.graphs_up_to(bound) {
            for start in 0..g.node_count() {
                let visited = simulate_walk(g, start, seq.terms());
                let mut seen = vec![false; g.node_count()];
                for &v in &visited {
                    seen[v] = true;
                }
                assert!(seen.iter().all(|&s| s), "bound {bound}: uncovered node");
                // Reverse the recorded arrival ports to walk back.
                let mut at = *visited.last().unwrap();
                let mut ports = Vec::new();
                let mut cur = start;
                let mut entry = 0u16;
                for &term in seq.terms() {
                    let port = byzgather::explo::explo_step(entry, g.degree(cur), term);
                    let (next, arr) = g.traverse(cur, port);
                    ports.push(arr);
                    cur = next;
                    entry = arr;
                }
                for &p in ports.iter().rev() {
                    at = g.traverse(at, p).0;
                }
                assert_eq!(at, start, "bound {bound}: backtrack missed the start");
            }
        }
    }
    println!("ACCEPTANCE 7 (exploration cover + backtrack): PASS");
}

/// Engine equivalence: compressed and uncompressed runs produce identical
/// expanded traces on randomized small scenarios, and repeated runs produce
/// identical digests.
#[test]
fn criterion_8_engine_equivalence() {
    use rand::{Rng, SeedableRng};
    let corpus = enumerate_graphs(5, DEFAULT_CORPUS_SEED).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for case in 0..50 {
        let graphs = corpus.graphs();
        let graph = graphs[rng.gen_range(0..graphs.len())].clone();
        let n = graph.node_count();
        let seq = provide_sequence(n.max(2), &corpus).unwrap();
        let goods = rng.gen_range(1..=3u64);
        let byz = rng.gen_range(0..=1u64);
        let mut agents = Vec::new();
        let mut wake = BTreeMap::new();
        for i in 0..goods {
            agents.push(good(i + 1, rng.gen_range(0..n)));
            wake.insert(i as usize, rng.gen_range(0..5));
        }
        for b in 0..byz {
            agents.push(AgentSpec {
                label: 50 + b,
                start_node: rng.gen_range(0..n),
                byzantine: true,
                script: Some(ScriptSpec::RandomWalk { seed: rng.gen() }),
            });
        }
        let inst = instance(graph, agents, wake, 1, n.max(2));
        let mk = |inst: &Instance| -> Vec<Box<dyn Behavior>> {
            inst.agents
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    if a.byzantine {
                        builtin_script(a.script.as_ref().unwrap(), a.label)
                    } else {
                        group_behavior(a.label, seq.x_n(), (i % 2) as u8, &seq).unwrap()
                    }
                })
                .collect()
        };
        let fast = run(&inst, mk(&inst), &RunConfig::compressed(10_000).with_full_trace()).unwrap();
        let slow =
            run(&inst, mk(&inst), &RunConfig::uncompressed(10_000).with_full_trace()).unwrap();
        let (a, b) = (fast.trace.expanded_steps(), slow.trace.expanded_steps());
        if a != b {
            let k = a.iter().zip(b.iter()).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len()));
            panic!(
                "case {case}: engines diverged at step {k} of {}/{}:\n  compressed:   {:?}\n  uncompressed: {:?}",
                a.len(),
                b.len(),
                a.get(k),
                b.get(k)
            );
        }
        assert_eq!(fast.summary.agents, slow.summary.agents, "case {case}");
        // Digest reproducibility: three repeats of the compressed run.
        let d1 = run(&inst, mk(&inst), &RunConfig::compressed(10_000)).unwrap();
        let d2 = run(&inst, mk(&inst), &RunConfig::compressed(10_000)).unwrap();
        assert_eq!(fast.summary.trace_digest, d1.summary.trace_digest, "case {case}");
        assert_eq!(d1.summary.trace_digest, d2.summary.trace_digest, "case {case}");
    }
    println!("ACCEPTANCE 8 (engine equivalence + digest reproducibility): PASS");
}

/// The fooling harness: the full gathering protocol with knowledge for
/// 4-node graphs, replayed on the 256-node family member, sees identical
/// observations for its whole run and declares prematurely.
#[test]
fn criterion_9_fooling_harness() {
    let seq = seq_for(4);
    let alg = move |label: u64, gk: u32| gather_behavior(label, gk, &seq).unwrap();
    let report = fooling_check(&alg, 1, 0, 1, 1).unwrap();
    assert!(report.observations_identical, "subject could distinguish the runs");
    assert!(report.declared_at_k, "subject did not declare at round k in the replay");
    assert!(report.premature, "declaration was not premature");
    println!("ACCEPTANCE 9 (fooling harness, depth 1): PASS");
}
