//! File formats, patch pipelines and the `tdict` command-line tool on top of
//! `tdict-core`.

pub mod cli;
pub mod error;
pub mod format;
pub mod pipeline;

pub use error::{CliError, Result};
