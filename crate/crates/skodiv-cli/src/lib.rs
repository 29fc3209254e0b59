//! Library surface of the verification CLI: config schema, report format,
//! and one runner per subcommand.  The binary in `main.rs` is a thin
//! dispatcher over these.

pub mod config;
pub mod report;
pub mod runners;
