//! Driver for the `damage-sim` binary: configuration handling, subcommands
//! and the exit-code contract.

pub mod commands;
pub mod config;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Core(#[from] damage_core::Error),

    #[error("{0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use damage_core::Error as E;
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Io(_) => EXIT_RUNTIME,
            CliError::Core(e) => match e {
                E::Assumption(_) => EXIT_ASSUMPTION,
                E::Config(_)
                | E::InvalidArgument(_)
                | E::InvalidGrid(_)
                | E::GridMismatch(_)
                | E::Snapshot(_)
                | E::Format(_) => EXIT_PARSE,
                _ => EXIT_RUNTIME,
            },
        }
    }
}
