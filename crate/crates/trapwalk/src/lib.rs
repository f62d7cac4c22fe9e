//! Files, configuration, manifests and parallel drivers around
//! [`trapwalk_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod field_io;
pub mod manifest;
pub mod output;
pub mod parallel;

pub use error::CliError;

/// `git describe --always --dirty` at build time.
pub const GIT_DESCRIBE: &str = env!("TRAPWALK_GIT_DESCRIBE");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
