//! Command-line front end: configuration, run orchestration and artifacts.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{
    cmd_check_assumptions, cmd_selftest, cmd_solve, cmd_sweep, cmd_verify_geometry, CliError,
};
pub use config::{Config, ConfigError};
pub use report::{RunReport, RunStatus};
