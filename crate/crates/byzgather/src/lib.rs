//! Library and deterministic synchronous-round simulator for gathering mobile
//! agents on anonymous port-numbered graphs in the presence of Byzantine agents.
//!
//! The crate is organised around three layers:
//!
//! - **Model** ([`graph`], [`labels`], [`explo`]): port-numbered anonymous
//!   graphs, problem instances, label transformation, and the shared
//!   exploration sequences every agent applies identically.
//! - **Engine** ([`engine`], [`behavior`]): lock-step synchronous rounds with
//!   shouting communication, wake-up semantics, deterministic traces, and a
//!   wait-compression fast-forward that makes the protocols' literal round
//!   counts (which exceed 2^32 on four-node graphs) executable.
//! - **Protocols** ([`protocols`], [`adversary`], [`lowerbound`]): the GROUP /
//!   MERGE / GATHER state machines, scripted Byzantine adversaries, and the
//!   indistinguishability (fooling) harness on the oriented-ring instance
//!   family.
//!
//! Batch running and reporting live in [`suite`] and [`cli`]; the `byzgather`
//! binary is a thin wrapper over [`cli`]. The `examples/` directory contains
//! one runnable example per major capability and is the recommended entry
//! point for new readers.

pub mod adversary;
pub mod behavior;
pub mod cli;
pub mod engine;
pub mod explo;
pub mod graph;
pub mod labels;
pub mod lowerbound;
pub mod protocols;
pub mod suite;
