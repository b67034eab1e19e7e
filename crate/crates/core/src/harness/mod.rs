//! Configuration files, artifacts and the command-line front end.

pub mod beta_expr;
pub mod checks;
pub mod cli;
pub mod config;
pub mod output;
