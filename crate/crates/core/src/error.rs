use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the simulator can report. Variants map one-to-one onto the
/// machine-readable `kind` emitted by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("dimension mismatch: expected {expected} parameters, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("ingestion error in {path} at byte {offset}: {reason}")]
    Ingest { path: PathBuf, offset: u64, reason: String },

    #[error("partition error: {0}")]
    Partition(String),

    #[error(
        "local solve diverged (objective {objective:.6e}, initial {initial:.6e}); reduce local_lr (currently {lr})"
    )]
    Diverged { lr: f64, initial: f64, objective: f64 },

    #[error("round {round}, client {client}: {source}")]
    Client {
        round: usize,
        client: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("metering error: {0}")]
    Metering(String),

    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    #[error("analysis precondition violated: {0}")]
    Precondition(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output error: {0}")]
    Output(String),
}

impl Error {
    /// Stable identifier for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Validation(_) => "config",
            Error::Dimension { .. } => "dimension",
            Error::Ingest { .. } => "ingest",
            Error::Partition(_) => "partition",
            Error::Diverged { .. } => "diverged",
            Error::Client { source, .. } => source.kind(),
            Error::Metering(_) => "metering",
            Error::Diagnostic(_) => "diagnostic",
            Error::Precondition(_) => "precondition",
            Error::Io { .. } => "io",
            Error::Output(_) => "output",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_client(self, round: usize, client: usize) -> Self {
        Error::Client {
            round,
            client,
            source: Box::new(self),
        }
    }
}
