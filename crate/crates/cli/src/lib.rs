//! The `pansharp` command-line pipeline.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod table;

pub use commands::{run, Cli};
