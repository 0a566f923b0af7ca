//! Command-line front end for the simulated visuo-tactile workflow.
//!
//! Every command writes into a fresh output location and finishes by writing
//! `config.resolved.json`, which records the command, seed, inputs and the
//! full configuration with defaults filled in.

pub mod args;
pub mod commands;
pub mod report;
pub mod run;

pub use args::Cli;
pub use commands::dispatch;

/// Process exit status for a finished command.
pub fn exit_code(result: &taxel_pipeline::Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_usage() => 2,
        Err(_) => 1,
    }
}
