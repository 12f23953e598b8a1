//! Benchmark harness for the `divopt` library: experiment
//! configuration, seeded trial execution, and CSV/PGM result files.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{AlgorithmKind, ArchiveKind, DomainKind, Overrides, RunConfig};
pub use runner::{run_experiment, ExperimentOutcome, TrialOutcome};
