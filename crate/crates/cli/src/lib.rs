//! Command-line front ends and the session service.

pub mod args;
pub mod feasibility;
pub mod repl;
pub mod serve;
