//! Experiment harness, file formats, and CLI support for `gomea-core`.

pub mod bench;
pub mod config;
pub mod files;
pub mod presets;

pub use gomea_core as core;
