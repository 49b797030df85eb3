//! Configuration, output layout and the `owc` command line.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{check_report, cli_main, exit_code};
pub use config::{ConfigError, ConfigErrors, Profile, RunConfig};
