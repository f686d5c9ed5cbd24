//! Command-line front end for `gcm-core`: long-format CSV ingestion, flat
//! TOML configuration, analysis reports and replication-study presets.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod ingest;
pub mod presets;
pub mod report;

pub use error::{AppError, AppResult, ExitCode};
