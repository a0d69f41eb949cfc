//! File formats, configuration and commands of the `rhr` experiment runner.

pub mod commands;
pub mod config;
pub mod csvfmt;
mod error;
pub mod experiment;
pub mod external;
pub mod pgm;
pub mod rhrt;

pub use error::{CliError, Result};
