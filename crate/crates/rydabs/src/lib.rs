//! IO, configuration and parallel orchestration around `rydabs-core`.

pub mod commands;
pub mod config;
pub mod output;
pub mod runner;

pub use config::RunConfig;
