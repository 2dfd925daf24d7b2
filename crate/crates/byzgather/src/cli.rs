//! Command-line plumbing: single runs, suite matrices, and the fooling
//! harness, with file-based configuration and stable exit codes.
//!
//! Exit codes:
//! - 0 — success (run: common declaration; suite: every cell passed; fool:
//!   the algorithm was fooled)
//! - 1 — ran to completion but the success property did not hold
//! - 2 — invalid input (instance, suite file, parameters)
//! - 3 — horizon exhausted / result inconclusive
//! - 4 — protocol fault or internal engine refusal
//! - 5 — I/O failure

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::adversary::{builtin_script, ScriptSpec};
use crate::behavior::Behavior;
use crate::engine::{run, RunConfig, RunResult};
use crate::engine::trace::TraceMode;
use crate::explo::provide_sequence;
use crate::graph::{enumerate_graphs, validate_instance, Instance, DEFAULT_CORPUS_SEED};
use crate::lowerbound::{declare_now, fooling_check_with, FoolingConfig, LowerBoundError};
use crate::protocols::gather::gather_behavior;
use crate::suite::{protocol_behavior, run_suite, Protocol, SuiteSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILED: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_PROTOCOL_FAULT: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Parser, Debug)]
#[command(
    name = "byzgather",
    about = "Deterministic simulator for Byzantine-resilient gathering on anonymous graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Simulate one instance file under one protocol.
    Run(RunArgs),
    /// Run a suite file: a matrix of graphs, faults, wake policies, scripts.
    Suite(SuiteArgs),
    /// Run the ring-family fooling harness.
    Fool(FoolArgs),
    /// List the exploration sequences for each size bound (building and
    /// caching any that are missing).
    Sequences(SequencesArgs),
}

#[derive(Args, Debug)]
pub struct SequencesArgs {
    /// Largest size bound to list.
    #[arg(long, default_value_t = 16)]
    pub max_bound: usize,
    /// Corpus sampling seed.
    #[arg(long, default_value_t = DEFAULT_CORPUS_SEED)]
    pub seed: u64,
    /// Also print every sequence's terms.
    #[arg(long)]
    pub terms: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineSel {
    Compressed,
    Uncompressed,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Instance file (JSON).
    #[arg(long)]
    pub instance: PathBuf,
    /// Protocol for the good agents.
    #[arg(long, value_enum, default_value = "gather")]
    pub protocol: ProtocolSel,
    /// Round engine.
    #[arg(long, value_enum, default_value = "compressed")]
    pub engine: EngineSel,
    /// Simulation horizon in rounds.
    #[arg(long, default_value_t = 1 << 40)]
    pub horizon: u64,
    /// Write the full step trace here (forces full trace recording).
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    /// Write the summary JSON here (also printed to stdout).
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
    /// Seed for graph sampling and the random_walk script only; protocol
    /// logic is seed-free.
    #[arg(long, default_value_t = DEFAULT_CORPUS_SEED)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolSel {
    Gather,
    Group,
    Merge,
}

impl From<ProtocolSel> for Protocol {
    fn from(p: ProtocolSel) -> Protocol {
        match p {
            ProtocolSel::Gather => Protocol::Gather,
            ProtocolSel::Group => Protocol::Group,
            ProtocolSel::Merge => Protocol::Merge,
        }
    }
}

#[derive(Args, Debug)]
pub struct SuiteArgs {
    /// Suite file (JSON).
    #[arg(long)]
    pub file: PathBuf,
    /// Write the per-cell CSV here.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
    /// Write the aggregate JSON report here.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgSel {
    /// The full gathering protocol.
    Gather,
    /// Declare in the wake round (trivially foolable smoke test).
    DeclareNow,
}

#[derive(Args, Debug)]
pub struct FoolArgs {
    /// Global knowledge handed to the algorithm.
    #[arg(long, default_value_t = 1)]
    pub gk: u32,
    /// Family member for the recording run.
    #[arg(long, default_value_t = 0)]
    pub j: u32,
    /// Family member for the replay run.
    #[arg(long, default_value_t = 1)]
    pub j2: u32,
    /// Polynomial degree of the assumed time bound.
    #[arg(long, default_value_t = 1)]
    pub c: u32,
    /// Algorithm under test.
    #[arg(long, value_enum, default_value = "gather")]
    pub alg: AlgSel,
    /// Horizon for the recording run.
    #[arg(long, default_value_t = 1 << 40)]
    pub horizon: u64,
    /// Write the JSON report here.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

/// Parses `args` (not including the binary name) and runs the command.
pub fn run_cli_from<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(
        std::iter::once(std::ffi::OsString::from("byzgather"))
            .chain(args.into_iter().map(|a| a.into())),
    ) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with success codes of its own.
            let code = if e.use_stderr() { EXIT_INVALID_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.cmd {
        Cmd::Run(a) => cmd_run(&a),
        Cmd::Suite(a) => cmd_suite(&a),
        Cmd::Fool(a) => cmd_fool(&a),
        Cmd::Sequences(a) => cmd_sequences(&a),
    }
}

/// Entry point for the binary: parses `std::env::args`.
pub fn run_cli() -> i32 {
    run_cli_from(std::env::args_os().skip(1))
}

pub fn cmd_run(a: &RunArgs) -> i32 {
    let text = match std::fs::read_to_string(&a.instance) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", a.instance.display());
            return EXIT_IO;
        }
    };
    let instance = match Instance::from_json(&text) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("instance rejected: {e}");
            return EXIT_INVALID_INPUT;
        }
    };
    let violations = validate_instance(&instance);
    if !violations.is_empty() {
        eprintln!("instance rejected:");
        for v in &violations {
            eprintln!("  - {v}");
        }
        return EXIT_INVALID_INPUT;
    }

    let n = instance.graph.node_count();
    let corpus = match enumerate_graphs(n.min(6), DEFAULT_CORPUS_SEED) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("corpus construction failed: {e}");
            return EXIT_INVALID_INPUT;
        }
    };
    let seq = match provide_sequence(instance.size_bound, &corpus) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("exploration sequence unavailable: {e}");
            return EXIT_INVALID_INPUT;
        }
    };

    let behaviors: Result<Vec<Box<dyn Behavior>>, String> = instance
        .agents
        .iter()
        .enumerate()
        .map(|(i, ag)| {
            if ag.byzantine {
                Ok(builtin_script(ag.script.as_ref().unwrap_or(&ScriptSpec::Inert), ag.label))
            } else {
                protocol_behavior(a.protocol.into(), ag.label, i, &seq, instance.gk)
                    .map_err(|e| e.to_string())
            }
        })
        .collect();
    let behaviors = match behaviors {
        Ok(b) => b,
        Err(e) => {
            eprintln!("behavior construction failed: {e}");
            return EXIT_INVALID_INPUT;
        }
    };

    let mut config = match a.engine {
        EngineSel::Compressed => RunConfig::compressed(a.horizon),
        EngineSel::Uncompressed => RunConfig::uncompressed(a.horizon),
    };
    if a.trace_out.is_some() {
        config.trace_mode = TraceMode::Full;
    }

    let result: RunResult = match run(&instance, behaviors, &config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("engine refused the run: {e}");
            return EXIT_INVALID_INPUT;
        }
    };
    let summary = &result.summary;

    if let Some(path) = &a.trace_out {
        let write = std::fs::File::create(path)
            .map(std::io::BufWriter::new)
            .and_then(|mut w| result.trace.write_lines(summary, &mut w));
        if let Err(e) = write {
            eprintln!("cannot write trace to {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    let json = serde_json::to_string_pretty(summary).expect("summaries serialize");
    if let Some(path) = &a.summary_out {
        if let Err(e) = std::fs::write(path, &json) {
            eprintln!("cannot write summary to {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    println!("{json}");

    use crate::engine::RunOutcome;
    match &summary.outcome {
        RunOutcome::GoodAgentsTerminated => {
            if let Some((round, node)) = summary.common_declare() {
                eprintln!("common declaration at round {round}, node {node}");
                EXIT_OK
            } else {
                eprintln!("good agents terminated without a common declaration");
                EXIT_PROPERTY_FAILED
            }
        }
        RunOutcome::HorizonExhausted => {
            eprintln!("horizon of {} rounds exhausted", a.horizon);
            EXIT_INCONCLUSIVE
        }
        RunOutcome::ProtocolFault { agent, round, detail } => {
            eprintln!("protocol fault by agent {agent} at round {round}: {detail}");
            EXIT_PROTOCOL_FAULT
        }
        RunOutcome::CompressionViolation { agent, round } => {
            eprintln!("compression contract violated by agent {agent} at round {round}");
            EXIT_PROTOCOL_FAULT
        }
    }
}

pub fn cmd_suite(a: &SuiteArgs) -> i32 {
    let text = match std::fs::read_to_string(&a.file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", a.file.display());
            return EXIT_IO;
        }
    };
    let spec = match SuiteSpec::from_json(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_INVALID_INPUT;
        }
    };
    let report = run_suite(&spec, a.workers);
    if let Some(path) = &a.csv_out {
        if let Err(e) = std::fs::write(path, report.to_csv()) {
            eprintln!("cannot write CSV to {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    if let Some(path) = &a.json_out {
        if let Err(e) = std::fs::write(path, report.to_json()) {
            eprintln!("cannot write JSON to {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    println!(
        "suite: {} cells, {} passed, {} failed",
        report.cells.len(),
        report.passed,
        report.failed
    );
    for c in report.cells.iter().filter(|c| !c.passed) {
        println!(
            "  cell {} [{} f={} goods={} wake={} script={}]: {}",
            c.cell,
            c.graph,
            c.f,
            c.good_count,
            c.wake,
            c.script.as_deref().unwrap_or("-"),
            c.error.as_deref().unwrap_or(&c.failures.join("; "))
        );
    }
    if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_PROPERTY_FAILED
    }
}

pub fn cmd_fool(a: &FoolArgs) -> i32 {
    // The gather factory needs the exploration sequence for the knowledge
    // bound the algorithm believes in.
    let alg: Box<dyn Fn(u64, u32) -> Box<dyn Behavior>> = match a.alg {
        AlgSel::DeclareNow => Box::new(|label, _gk| declare_now(label)),
        AlgSel::Gather => {
            let bound = match crate::protocols::gather::n_from_gk(a.gk) {
                Ok(n) => n as usize,
                Err(e) => {
                    eprintln!("bad knowledge parameter: {e}");
                    return EXIT_INVALID_INPUT;
                }
            };
            let corpus = match enumerate_graphs(bound.min(6), DEFAULT_CORPUS_SEED) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("corpus construction failed: {e}");
                    return EXIT_INVALID_INPUT;
                }
            };
            let seq = match provide_sequence(bound, &corpus) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("exploration sequence unavailable: {e}");
                    return EXIT_INVALID_INPUT;
                }
            };
            Box::new(move |label, gk| gather_behavior(label, gk, &seq).expect("knowledge checked"))
        }
    };

    let cfg = FoolingConfig { horizon: a.horizon };
    match fooling_check_with(&*alg, a.gk, a.j, a.j2, a.c, &cfg) {
        Ok(report) => {
            println!("{report}");
            if let Some(path) = &a.report_out {
                let json = serde_json::to_string_pretty(&report).expect("reports serialize");
                if let Err(e) = std::fs::write(path, json) {
                    eprintln!("cannot write report to {}: {e}", path.display());
                    return EXIT_IO;
                }
            }
            if report.passes() {
                EXIT_OK
            } else {
                EXIT_PROPERTY_FAILED
            }
        }
        Err(e @ LowerBoundError::Inconclusive { .. }) => {
            eprintln!("{e}");
            EXIT_INCONCLUSIVE
        }
        Err(e @ LowerBoundError::MirrorInfeasible { .. }) => {
            eprintln!("{e}");
            EXIT_PROTOCOL_FAULT
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_INVALID_INPUT
        }
    }
}

pub fn cmd_sequences(a: &SequencesArgs) -> i32 {
    if a.max_bound < 2 {
        eprintln!("size bounds start at 2");
        return EXIT_INVALID_INPUT;
    }
    let corpus = match enumerate_graphs(a.max_bound.min(6), a.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("corpus construction failed: {e}");
            return EXIT_INVALID_INPUT;
        }
    };
    println!("corpus: {} graphs (≤ {} nodes), digest {}", corpus.graphs().len(), corpus.max_nodes(), corpus.digest_hex());
    println!("{:>6} {:>6} {:>10}", "bound", "X_n", "provenance");
    for bound in 2..=a.max_bound {
        match provide_sequence(bound, &corpus) {
            Ok(seq) => {
                println!("{:>6} {:>6} {:>10?}", bound, seq.x_n(), seq.provenance());
                if a.terms {
                    println!("       terms: {:?}", seq.terms());
                }
            }
            Err(e) => {
                eprintln!("bound {bound}: {e}");
                return EXIT_PROPERTY_FAILED;
            }
        }
    }
    EXIT_OK
}
