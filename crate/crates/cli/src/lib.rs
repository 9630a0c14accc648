//! Batch driver for the `cocycle-lab` binary: TOML experiment configs,
//! one runner per subcommand, and JSON/CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod experiment;
pub mod output;

pub use commands::{run, Command, Context, Counterexample, Report};
pub use experiment::ExperimentConfig;
