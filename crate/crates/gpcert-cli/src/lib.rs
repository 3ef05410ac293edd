//! Library surface of the command-line tool, exposed so the integration and
//! acceptance suites can drive the commands in-process.

pub mod commands;
pub mod dataset;
pub mod formats;
