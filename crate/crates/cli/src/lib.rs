//! Configuration, field files and the subcommands behind the `robin-ns`
//! binary.

pub mod commands;
pub mod config;
pub mod fieldio;

/// Process exit code for an error: 2 for a diverging Picard iteration, 1
/// for anything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<robin_ns::Error>() {
        Some(robin_ns::Error::PicardDivergence(_)) => 2,
        _ => 1,
    }
}
