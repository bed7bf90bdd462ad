//! Command-line driver for the β-plane solver: TOML run configs, NDJSON
//! series, BPNS snapshots.

pub mod commands;
pub mod config;
pub mod output;
pub mod snapshot;

pub use commands::{execute, run_config, CliError, RunOptions, RunOutput};
pub use config::{parse_config, parse_config_file, ConfigError, RunConfig, Subcommand};
