//! Library side of the `synfuel` command: configuration, data loading and
//! the subcommand implementations.

pub mod commands;
pub mod config;
pub mod scenario;
