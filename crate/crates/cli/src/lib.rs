//! Experiment runner for `dualrec`: TOML configuration, the command
//! implementations behind the `dualrec` binary, and the exporters.

pub mod config;
pub mod error;
pub mod export;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
