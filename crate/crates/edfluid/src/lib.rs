//! File formats, the convergence harness and the command-line front end for
//! `edfluid-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod harness;
pub mod manifest;

pub use error::AppError;
