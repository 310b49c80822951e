//! Library surface of the batch CLI: config parsing, the staged pipeline
//! and artifact writers. The binary in `main.rs` is a thin wrapper so that
//! integration tests can drive runs in-process.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{load_config, BacktestConfig, LoadedConfig, Stage};
pub use pipeline::Pipeline;
