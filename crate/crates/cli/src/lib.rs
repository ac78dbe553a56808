//! Command implementations behind the `spectra` binary.
//!
//! Every command is a plain function so the integration tests can drive it
//! without spawning a process.

pub mod check;
pub mod input;
pub mod render;
pub mod report;
pub mod reproduce;

pub use input::{exit_code_for, InputError};

/// Process exit code for an input error (`EX_DATAERR`-style).
pub const EXIT_INPUT: i32 = 64;
/// Process exit code for an internal failure.
pub const EXIT_INTERNAL: i32 = 70;
/// `reproduce` exit code when a golden tolerance is violated.
pub const EXIT_GOLDEN: i32 = 3;
