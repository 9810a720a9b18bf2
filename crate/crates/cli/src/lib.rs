//! Command-line front end: table formats and subcommands.

pub mod commands;
pub mod table;

/// Exit status for a failure: 3 when an optimizer gave up, 2 for anything
/// the user can fix.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<sdr_core::Error>() {
        Some(sdr_core::Error::OptimizerDidNotConverge { .. }) => 3,
        _ => 2,
    }
}
