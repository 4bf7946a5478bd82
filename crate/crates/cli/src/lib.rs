//! Command implementations behind the `tracelens` binary.

pub mod commands;
pub mod error;
pub mod plots;
pub mod report;
