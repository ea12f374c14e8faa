//! Library half of the `nflab` binary: configuration schema and the
//! four command implementations, kept out of `main.rs` so integration
//! tests can reach them directly.

pub mod commands;
pub mod config;
