mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use selfish_core::Error as CoreError;

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, parameters or input files.
    Usage(String),
    /// A solver or evaluation failed.
    Numeric(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NotConverged { .. } | CoreError::Degenerate(_) | CoreError::ScalarOnlyModel => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn report(err: &CliError, json: bool) -> ExitCode {
    if json {
        let body = serde_json::json!({
            "error": { "kind": err.kind(), "message": err.message(), "exit_code": err.code() }
        });
        eprintln!("{body}");
    } else {
        eprintln!("error: {}", err.message());
    }
    ExitCode::from(err.code())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    // only the sweep fans out; everything else stays on one thread
    let threads = match &cli.command {
        Command::Sweep(a) => a.jobs,
        _ => 1,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Optimize(a) => commands::optimize(a),
        Command::Threshold(a) => commands::threshold(a),
        Command::Sweep(a) => commands::sweep_grid(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Render(a) => commands::render(a),
        Command::Delay(a) => commands::delay(a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let json = std::env::args().any(|a| a == "--json-errors");
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return report(&CliError::Usage(line.to_string()), json);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e, cli.json_errors),
    }
}
