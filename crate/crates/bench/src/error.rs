use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Malformed { path: PathBuf, message: String },

    #[error("clustering produced no clusters")]
    NoClusters,

    #[error(transparent)]
    Core(#[from] exdbscan_core::Error),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn malformed(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        BenchError::Malformed {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 1 configuration, 2 I/O or unreadable input,
    /// 3 internal invariant violation, 4 the explanation itself failed.
    pub fn exit_code(&self) -> i32 {
        use exdbscan_core::Error as E;
        match self {
            BenchError::Config(_) | BenchError::NoClusters => 1,
            BenchError::Io { .. } | BenchError::Malformed { .. } => 2,
            BenchError::Core(e) if e.is_query_failure() => 4,
            BenchError::Core(e) => match e {
                E::InvalidParameter(_)
                | E::InvalidConstraint(_)
                | E::DimensionMismatch { .. }
                | E::UnknownCluster(_)
                | E::InsufficientData { .. } => 1,
                E::InvalidData(_) | E::EmptyDataset { .. } | E::Csv(_) | E::Io(_) => 2,
                _ => 3,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Config(_) => "Config",
            BenchError::Io { .. } => "Io",
            BenchError::Malformed { .. } => "Malformed",
            BenchError::NoClusters => "NoClusters",
            BenchError::Core(e) => e.kind(),
        }
    }

    /// Single-line diagnostic for standard error:
    /// `error exit=<code> kind=<Kind> message=<text>`.
    pub fn diagnostic(&self) -> String {
        let message = self.to_string().replace(['\n', '\r'], " ");
        format!(
            "error exit={} kind={} message={}",
            self.exit_code(),
            self.kind(),
            message
        )
    }
}
