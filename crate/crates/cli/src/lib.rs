//! Batch front end for own-voice data generation: model estimation,
//! augmentation, noise spatialization, mixing, mask reconstruction and file
//! validation, driven by JSONL manifests and a TOML configuration.

pub mod audio;
pub mod cli;
pub mod commands;
pub mod config;
pub mod hrir;
pub mod manifest;
pub mod seeds;
pub mod subset;

pub use cli::{exit_code, run, Cli};
pub use config::PipelineConfig;

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for invalid input, configuration or failed validation.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit status for file-system and other I/O failures.
pub const EXIT_IO: i32 = 2;
