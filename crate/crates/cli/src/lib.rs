//! Command-line front end for `secrecy-region`: scenario files, dispatch to
//! the engines, CSV tables and text reports.

pub mod commands;
pub mod scenario;

pub use commands::{Failure, Output};
pub use scenario::Scenario;
