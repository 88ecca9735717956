//! Batch front end for `schelling-core`: TOML configuration, subcommand
//! dispatch, seeded replicas and hashed artifact files.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{dispatch, Command, RunError};
pub use config::{ConfigError, Overrides, RunConfig};
