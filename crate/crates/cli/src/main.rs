//! `revspec`: geodesic return data, length spectra and isospectral families
//! of rotationally symmetric spheres from the command line.
//!
//! Exit status: 0 when the run succeeds and its checks pass, 1 when a check
//! fails or a numerical error is reported, 2 on usage errors.

mod args;
mod commands;
mod expr;
mod input;
mod output;
mod report;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::input::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

fn configure_threads() -> Result<(), UsageError> {
    let Ok(value) = std::env::var("REVSPEC_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("REVSPEC_THREADS must be a positive integer, got {value:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| UsageError(format!("cannot size the thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let run = configure_threads().map_err(anyhow::Error::from).and_then(|()| commands::run(cli));
    match run {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(u) = e.downcast_ref::<UsageError>() {
                if !u.0.contains(input::SCHEMA_HELP) {
                    eprintln!("\n{}", input::SCHEMA_HELP);
                }
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
