//! Command-line front end for the pair-source simulator: TOML configs,
//! the four subcommands (`device`, `sweep`, `zwm`, `fit`), and CSV I/O.
//! All behavior lives here so tests can drive the same code paths the
//! binary does.

pub mod commands;
pub mod config;
pub mod error;
