//! Command-line harness for `tabsketch`: stream files, sketch files, builds
//! under every strategy, queries, accuracy evaluation and benchmarks.

pub mod commands;
pub mod error;
pub mod format;
pub mod report;

pub use commands::{run, Cli};
pub use error::CliError;
