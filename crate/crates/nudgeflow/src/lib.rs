//! Command-line companion of `nudgeflow-core`: configuration files, CSV and
//! raster formats, and the `run`, `validate` and `sweep` commands.

pub mod commands;
pub mod config;
pub mod io;

pub use config::{ConfigError, RunConfig};
pub use io::FormatError;
