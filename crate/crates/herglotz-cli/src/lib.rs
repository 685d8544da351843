//! Verification suites and evaluation commands behind the `herglotz` binary.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod verify;

pub use config::{Dim, ParamFlags, RunConfig};
pub use error::{CliError, CliResult, Status};
