//! Command-line front end for the tactile display simulator.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_budget, cmd_clear, cmd_show, cmd_text, cmd_verify, exit, CliError, Outcome, Render,
    RunOpts, RunStats, Session, ShowInput, VerifyReport, VerifyScope,
};
pub use config::{Config, ConfigError};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "TACTILE_CONFIG";
