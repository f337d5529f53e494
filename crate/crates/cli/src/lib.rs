// SPDX-License-Identifier: Apache-2.0

//! The `tilesoc` command-line tool.
//!
//! | command  | purpose                                                  |
//! |----------|----------------------------------------------------------|
//! | `gen`    | expand a platform description into a configuration      |
//! | `run`    | simulate a configuration, optionally serving debug TCP  |
//! | `attach` | capture a trace from a running simulation into JSONL    |
//! | `serve`  | HTTP/WebSocket API in front of a running simulation     |
//!
//! Exit codes are listed in [`Exit`].

pub mod attach;
pub mod gen;
pub mod run;
pub mod serve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// Simulation or runtime failure, including malformed trace frames.
    Failure = 1,
    /// Invalid input document: description, trigger file or arguments.
    Invalid = 2,
    /// Configuration or programs could not be loaded, or the debug port
    /// could not be opened.
    Load = 3,
    /// The simulator could not be reached.
    Unreachable = 4,
}

/// Error with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn new(exit: Exit, message: impl Into<String>) -> Self {
        Failure {
            exit,
            message: message.into(),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(
    name = "tilesoc",
    version,
    about = "Tiled SoC simulator with trace-based debugging"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand a platform description into a configuration.
    Gen {
        #[arg(long = "in", value_name = "description.json")]
        input: PathBuf,
        #[arg(long = "out", value_name = "config.json")]
        output: PathBuf,
    },
    /// Run a simulation.
    Run(run::RunArgs),
    /// Attach to a simulation and write its trace as JSON lines.
    Attach {
        #[arg(long, value_name = "host:port")]
        connect: String,
        #[arg(long, value_name = "triggers.json")]
        triggers: Option<PathBuf>,
        #[arg(long, value_name = "trace.jsonl")]
        out: PathBuf,
    },
    /// Serve the HTTP/WebSocket debug API for a simulation.
    Serve(serve::ServeArgs),
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Exit::Invalid as i32
            } else {
                Exit::Ok as i32
            };
        }
    };
    let result = match cli.command {
        Command::Gen { input, output } => gen::cmd_gen(&input, &output),
        Command::Run(args) => run::cmd_run(&args),
        Command::Attach {
            connect,
            triggers,
            out,
        } => attach::cmd_attach(&connect, triggers.as_deref(), &out),
        Command::Serve(args) => serve::cmd_serve(&args),
    };
    match result {
        Ok(()) => Exit::Ok as i32,
        Err(f) => {
            eprintln!("tilesoc: {}", f.message);
            f.exit as i32
        }
    }
}
