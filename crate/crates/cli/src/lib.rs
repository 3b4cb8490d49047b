//! Configuration, orchestration and artifacts for the `linfel` command.

pub mod compare;
pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod table;

pub use compare::{compare, CompareOptions, Comparison};
pub use config::{RunConfig, RunMode};
pub use error::{exit, CliError};
pub use report::Report;
pub use run::{run, Outcome};
