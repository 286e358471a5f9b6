//! Command-line front end for sidesynth: benchmark registry, run
//! configuration, and the `analyze`, `attack`, `count` and `bench` commands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod registry;

pub use cli::{exit_code, run, Cli};
