//! File formats, experiment configuration and the command-line harness for
//! [`nlasso_core`].
//!
//! Graphs, datasets and ground truth are JSON documents. Solver traces and
//! sweeps are CSV files, each with a `.meta.json` sidecar that embeds the
//! fully resolved configuration.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
