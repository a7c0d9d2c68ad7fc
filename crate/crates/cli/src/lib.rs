//! Library side of the command-line front end: configuration handling and
//! reference-table regeneration. The binary in `main.rs` is a thin
//! orchestrator over this and `qpartial-core`.

pub mod config;
pub mod tables;
