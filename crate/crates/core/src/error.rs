use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("track {traj_id} has fewer than 2 distinct positions after deduplication")]
    DegenerateTrack { traj_id: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    /// An error tagged with the pipeline stage that raised it.
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit status for this error: 2 config, 3 data, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::DegenerateTrack { .. }
            | Error::Data(_)
            | Error::Parse { .. }
            | Error::Io { .. } => 3,
            Error::Contract(_) | Error::Invariant(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
