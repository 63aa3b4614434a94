//! Command-line front end and file formats for `bispec-core`.

pub mod binary;
pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod json;
pub mod sweep;

pub use error::{CliError, Result};
