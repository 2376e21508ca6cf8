//! Scenario files, output formats and the subcommands behind the
//! `immunesim` binary.

pub mod commands;
pub mod error;
pub mod eventlog;
pub mod manifest;
pub mod scenario;
pub mod table;

pub use commands::{cmd_compare, cmd_meanfield, cmd_run, cmd_sweep, CompareOptions, RunOptions, SweepAxis};
pub use error::{CliError, Result};
pub use scenario::Scenario;
