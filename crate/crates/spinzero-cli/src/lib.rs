//! Verification suites for `spinzero` and the command-line runner behind
//! the `spinzero` binary.

pub mod checks;
pub mod criteria;
pub mod config;
pub mod suites;
pub mod converge;
pub mod app;
