//! Experiment driver: a TOML configuration and the pipeline stages that
//! turn it into templates, scans, attacks, fakes, metric tables and a
//! report bundle.

pub mod config;
pub mod stages;

pub use config::ExperimentConfig;
pub use stages::{Stage, Workspace};
