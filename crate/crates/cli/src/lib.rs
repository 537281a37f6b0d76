//! Pipeline driver: configuration, stage subcommands, rendering and metrics.

pub mod config;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod render;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use pipeline::{Command, Stage};
