//! Command-line harness for the cyclecast experiments.
//!
//! The binary is a thin wrapper over [`run`]; every subcommand returns the
//! text it prints so tests can drive the commands in-process.

pub mod args;
pub mod commands;

use thiserror::Error;

pub use args::{Cli, Command, Global};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: cyclecast::Error,
    },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub(crate) fn data<E: Into<cyclecast::Error>>(context: impl Into<String>) -> impl FnOnce(E) -> CliError {
        let context = context.into();
        move |e| CliError::Data {
            context,
            source: e.into(),
        }
    }

    pub(crate) fn usage<E: std::fmt::Display>(context: impl Into<String>) -> impl FnOnce(E) -> CliError {
        let context = context.into();
        move |e| CliError::Usage(format!("{context}: {e}"))
    }
}

/// Executes a parsed command line, returning the text report.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth(a) => commands::cmd_synth(g, a),
        Command::Bench(a) => commands::cmd_bench(g, a).map(|r| cyclecast::report::render_bench(&r)),
        Command::Ablation(a) => commands::cmd_ablation(g, a).map(|r| cyclecast::report::render_ablation(&r)),
        Command::Tune(a) => commands::cmd_tune(g, a).map(|r| cyclecast::report::render_tune(&r)),
        Command::Predict(a) => commands::cmd_predict(g, a).map(|r| cyclecast::report::render_predict(&r)),
    }
}
