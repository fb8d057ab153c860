//! Library surface of the pipeline CLI, exposed so integration tests can
//! drive stages in-process.

pub mod artifacts;
pub mod config;
pub mod stages;

pub use config::RunConfig;
pub use stages::{run_command, run_with_threads, Command, StageOutcome};
