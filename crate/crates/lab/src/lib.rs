//! Experiments, file formats and the command line around `vflip-core`.
//!
//! Configuration is TOML with a fixed key schema ([`config`]), experiments
//! run ensembles in parallel ([`experiment`]), and every command writes CSV
//! tables and a `summary.json` atomically ([`output`]).

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod identities;
pub mod output;

pub use error::{LabError, LabResult};

/// The configuration used when `--config` is not given.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");
