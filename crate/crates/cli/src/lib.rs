//! File formats, run orchestration, and the command implementations behind
//! the `signgt` binary.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod export;
pub mod runner;

pub use error::CliError;
