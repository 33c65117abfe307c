//! Support library for the `bzm` binary.
//!
//! The binary wires four pieces together: a flat key/value [`config`]
//! format, deterministic initial-data [`profiles`], a compact binary
//! [`field_io`] container for sampled fields, and [`artifacts`] (CSV series
//! plus a JSON manifest) written into a per-run output directory.  Each
//! subcommand lives in [`commands`] and returns the manifest's `outcome`
//! block together with the process exit status.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod field_io;
pub mod profiles;

use thiserror::Error;

/// Everything that can go wrong while running a command.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing configuration values.
    #[error("config: {0}")]
    Config(String),
    /// A field file did not match the expected layout.
    #[error("field file: {0}")]
    Format(String),
    /// Underlying I/O failure.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    /// Errors bubbled up from the numerics library.
    #[error(transparent)]
    Core(#[from] bzm_core::Error),
    /// Manifest serialization failure.
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// How a successfully executed command wants the process to exit.
///
/// `MonitorStopped` maps to exit code 2: the run itself is healthy but a
/// configured threshold fired and stopped it early.  Hard errors exit 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Clean,
    MonitorStopped,
}
