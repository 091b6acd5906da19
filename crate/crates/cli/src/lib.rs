//! Command-line front end: config handling, artifact writers and one runner
//! per subcommand.

pub mod args;
pub mod commands;
pub mod config;
pub mod output;

pub use args::{Cli, Command, CommonArgs};
pub use commands::{run, Outcome, RunError, CRITERIA_FAILED};
pub use config::{ConfigError, ExperimentConfig, NonlinearitySpec};
