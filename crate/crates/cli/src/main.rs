//! `opdyn`: analyze signed networks, simulate and verify opinion dynamics.

mod commands;
mod config;
mod failure;
mod plot;
mod reproduce;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "opdyn", version, about = "Opinion dynamics on signed digraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides `run.seed` (and the reproduce seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Format of the standard-output record.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectral and stability certificates of a network.
    Analyze {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate one trajectory and classify its limit.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample the initial region and check the predicted limit.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rerun the panels of a bundled example (1: karate club, 2: three agents).
    Reproduce {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
        example: u8,
    },
}

pub struct Session {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub format: Format,
}

impl Session {
    pub fn emit(&self, text: String) {
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(text.as_bytes());
        let _ = out.flush();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let session = Session {
        seed: cli.seed,
        out: cli.out,
        format: cli.format,
    };
    let result = match &cli.command {
        Command::Analyze { config } => commands::analyze(&session, config),
        Command::Simulate { config } => commands::simulate(&session, config),
        Command::Verify { config } => commands::verify(&session, config),
        Command::Reproduce { example } => reproduce::reproduce(&session, *example),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let failure = err.downcast_ref::<Failure>().copied();
            let (code, reason) = failure.map_or((1, "error"), |f| (f.kind.exit_code(), f.reason));
            let record = serde_json::json!({
                "error": reason,
                "exit_code": code,
                "message": format!("{err:#}"),
            });
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
