//! Experiment harness for the `lqdg` solvers: benchmark-game studies, the
//! random-game batch, artifact writers and the command-line front end.

pub mod artifacts;
pub mod cli;
pub mod experiments;
pub mod summary;
pub mod svg;

pub use summary::{AlgorithmSummary, BenchSummary, InstanceOutcome};
