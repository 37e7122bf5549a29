//! Command-line front end and interactive review service for `pytypefill`.
//!
//! The `pytypefill` binary is a thin wrapper over [`commands::run`]. The
//! review service ([`server`]) drives [`session::Session`]s: one element at
//! a time, the user accepts or overrides each predicted type before the next
//! element is predicted.

pub mod commands;
pub mod config;
pub mod server;
pub mod session;

use std::path::Path;

pub use commands::{run, Cli, Command};
pub use config::{Backend, Config, ConfigLayer};
pub use server::router;
pub use session::{Session, SessionError, SessionStore};

/// Process exit codes.
pub mod exit {
    pub const OTHER: u8 = 1;
    pub const BAD_ARGS: u8 = 2;
    /// The project root is missing or unreadable.
    pub const LOAD: u8 = 3;
    /// The model server could not be reached; nothing was written.
    pub const BACKEND: u8 = 4;
    /// The project has nothing to annotate; nothing was written.
    pub const NO_ELEMENTS: u8 = 5;
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new(exit::OTHER, format!("{}: {e}", path.display()))
    }
}
