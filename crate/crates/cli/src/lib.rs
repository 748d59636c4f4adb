//! Command-line surface for the stochastic predator-prey engine: config
//! parsing, presets, CSV output and the subcommand drivers.

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;

pub use commands::{run, CliError, Command};
pub use config::{load_config, parse_config, ConfigError, Key, RunConfig, Setting};
