//! Sweeps, file formats and the command-line driver for the memory-map
//! population model. The numerics live in `memopat_core`.

pub mod commands;
pub mod config;
mod error;
pub mod io;
pub mod svg;
pub mod sweep;

pub use config::{parse_config, parse_config_with_overrides, Command, ConfigError, RunConfig};
pub use error::{Error, Result};
pub use memopat_core as core;
