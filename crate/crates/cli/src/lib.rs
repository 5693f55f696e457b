//! Command-line front end: flat configuration files, field and CSV
//! formats, and the `solve`, `eig`, `verify` and `sweep` subcommands.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::{run, Command, Outcome};
pub use config::{ConfigError, RawConfig, RunConfig};
