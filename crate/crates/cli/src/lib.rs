//! Library surface of the `sir` experiment runner.
//!
//! The binary is a thin wrapper over [`run`]; everything else is exposed so
//! integration tests can drive commands in-process and inspect the pieces
//! (config resolution, manifests, dataset plumbing) directly.
//!
//! Exit codes: 0 success; 2 usage, config, data, or I/O problems; 3 numeric
//! failure during training (non-finite loss or gradient); 1 internal
//! invariant violations.

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod manifest;

use clap::Parser;

use sir_core::Error;

/// Map an error to the process exit code class it belongs to.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonFiniteLoss { .. } | Error::NonFiniteGradient { .. } => 3,
        Error::Internal(_) => 1,
        _ => 2,
    }
}

/// Run one already-parsed command, printing errors (and their causes) to
/// stderr. Returns the process exit code.
pub fn run_command(command: &cli::Command) -> i32 {
    let result = match command {
        cli::Command::Train(args) => commands::cmd_train(args),
        cli::Command::Eval(args) => commands::cmd_eval(args),
        cli::Command::Compare(args) => commands::cmd_compare(args),
        cli::Command::GenSynthetic(args) => commands::cmd_gen_synthetic(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            exit_code(&err)
        }
    }
}

/// Parse argv and run. Clap itself exits 2 on usage errors and 0 for
/// `--help`/`--version`, so this only returns for well-formed invocations.
pub fn run() -> i32 {
    let parsed = cli::Cli::parse();
    run_command(&parsed.command)
}
