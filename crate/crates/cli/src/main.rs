//! `overlapscope` command-line tool.
//!
//! Exit codes: 0 on success, 1 when a check fails or the domain rejects the
//! input, 2 for usage and parse errors. Failures print one
//! `error: kind=<kind> message=<text>` line on stderr.

mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::run::Failure;

const THREADS_ENV: &str = "OVERLAPSCOPE_THREADS";

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = match value.trim().parse() {
        Ok(t) if t > 0 => t,
        _ => {
            return Err(Failure::Usage {
                kind: "invalid-argument".into(),
                message: format!("{THREADS_ENV} must be a positive integer, got {value:?}"),
            })
        }
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| Failure::Usage {
        kind: "invalid-argument".into(),
        message: format!("cannot configure {threads} worker threads: {e}"),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|()| run::execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
