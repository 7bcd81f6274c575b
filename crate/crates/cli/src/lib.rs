//! Command-line front end: scenario files in, JSON reports and CSV series out.
//!
//! Exit codes: 0 all expectations met, 1 expectation mismatch, 2 input or
//! validation error, 3 numerical failure. Nothing is written on 2 or 3.

pub mod report;
pub mod run;
pub mod scenario;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::report::Status;
use crate::run::{Format, RunOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn context(self, at: &str) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{at}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{at}: {m}")),
        }
    }
}

impl From<cocycle_lab::Error> for CliError {
    fn from(e: cocycle_lab::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cocycle-lab", version, about = "Matrix cocycle laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every analysis of a scenario and write the report.
    Run {
        scenario: PathBuf,
        output_dir: PathBuf,
        /// Override every horizon in the scenario.
        #[arg(long)]
        horizon: Option<usize>,
        /// Multiply all default tolerances.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Treat expectations that no analysis decides as mismatches.
        #[arg(long)]
        expect_strict: bool,
    },
    /// Flatten the in-band spectrum of a product, or certify given perturbations.
    Flatten {
        input: PathBuf,
        output_dir: PathBuf,
        #[arg(long)]
        verify_only: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Gallery of named constructions.
    Gallery {
        #[command(subcommand)]
        action: GalleryAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum GalleryAction {
    List,
}

/// Run the CLI on `args` (including the program name); returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run {
            scenario,
            output_dir,
            horizon,
            tol_scale,
            seed,
            threads,
            format,
            expect_strict,
        } => {
            let opts = RunOptions {
                horizon,
                tol_scale,
                seed,
                threads,
                format,
                expect_strict,
            };
            run::run(&scenario, &output_dir, &opts).map(|s| match s {
                Status::Ok => 0,
                Status::Mismatch => 1,
            })
        }
        Command::Flatten {
            input,
            output_dir,
            verify_only,
            format,
        } => run::flatten_cmd(&input, &output_dir, verify_only, format).map(|_| 0),
        Command::Gallery {
            action: GalleryAction::List,
        } => {
            print!("{}", run::gallery_listing());
            Ok(0)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cocycle-lab: {e}");
            e.exit_code()
        }
    }
}
