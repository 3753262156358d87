//! Simulation and verification of consensus in synchronous dynamic networks
//! whose communication graphs are chosen by an eventually stabilizing
//! message adversary.
//!
//! * [`graph`]: communication graphs, root components, compound graphs and
//!   causal pasts.
//! * [`adversary`]: adversary classes, membership checks, generators and
//!   scripted scenarios.
//! * [`engine`]: lock-step full-information execution.
//! * [`detection`]: root-component estimates from a process's knowledge.
//! * [`algorithms`]: the stabilizing consensus algorithm and compound-graph
//!   voting.
//! * [`verification`]: consensus properties, algorithm invariants and
//!   indistinguishability.

pub mod adversary;
pub mod algorithms;
pub mod cli;
pub mod detection;
pub mod engine;
pub mod error;
pub mod graph;
pub mod verification;

pub use error::{Error, Result};
pub use graph::{CommGraph, GraphSequence, ProcessId, ProcessSet, Round};
