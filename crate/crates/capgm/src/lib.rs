//! File formats, configuration and orchestration for the `capgm` command.
//!
//! The sampler and all posterior computations live in `capgm_core`; this
//! crate loads CSV data and flat config files, runs chains on a thread pool
//! and writes traces, summaries and co-clustering matrices.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod report;
pub mod traces;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
