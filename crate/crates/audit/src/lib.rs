//! File formats, configuration and the `credit-audit` command-line driver
//! around [`credit_audit_core`].
//!
//! Every command reads a TOML [`config::RunConfig`], writes its outputs
//! atomically under the output directory and records them, with their
//! SHA-256 digests, in `manifest_<command>.json`.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod output;

pub use commands::{run, Command};
pub use config::{Format, Overrides, RunConfig};
pub use error::{CliError, Result};
