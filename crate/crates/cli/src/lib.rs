//! Command-line front end: argument parsing, dataset and CSV plumbing,
//! experiment files and JSON run reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod experiment;
pub mod io;
pub mod report;

pub use args::Cli;
pub use commands::run;
pub use report::Report;
