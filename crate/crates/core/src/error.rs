use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset needs at least {required} rows, found {found}")]
    EmptyDataset { required: usize, found: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("unknown cluster {0}")]
    UnknownCluster(i64),

    #[error("unknown vertex {0}")]
    UnknownVertex(usize),

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("vertex {0} appears more than once in the subset")]
    DuplicateVertex(usize),

    #[error("distinct vertices {0} and {1} have zero graph distance")]
    ZeroGraphDistance(usize, usize),

    #[error("requested {requested} counterfactuals but only {available} admissible cores")]
    InsufficientCores { requested: usize, available: usize },

    #[error("exhaustive search over {combinations} subsets exceeds the limit of {limit}")]
    SearchSpaceTooLarge { combinations: u128, limit: u128 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("no feasible placement in the neighbourhood of core row {core}")]
    InfeasiblePlacement { core: usize },

    #[error("point is already assigned to target cluster {0}")]
    AlreadyInTarget(usize),

    #[error("no admissible core point")]
    NoAdmissibleCore,

    #[error("no valid counterfactuals")]
    NoValidCounterfactuals,

    #[error("counterfactuals reference more than one cluster")]
    MixedClusters,

    #[error("need more than {k} data rows, found {rows}")]
    InsufficientData { rows: usize, k: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable variant name, used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptyDataset { .. } => "EmptyDataset",
            Error::InvalidData(_) => "InvalidData",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::InvalidConstraint(_) => "InvalidConstraint",
            Error::UnknownCluster(_) => "UnknownCluster",
            Error::UnknownVertex(_) => "UnknownVertex",
            Error::InternalInconsistency(_) => "InternalInconsistency",
            Error::DuplicateVertex(_) => "DuplicateVertex",
            Error::ZeroGraphDistance(..) => "ZeroGraphDistance",
            Error::InsufficientCores { .. } => "InsufficientCores",
            Error::SearchSpaceTooLarge { .. } => "SearchSpaceTooLarge",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::InfeasiblePlacement { .. } => "InfeasiblePlacement",
            Error::AlreadyInTarget(_) => "AlreadyInTarget",
            Error::NoAdmissibleCore => "NoAdmissibleCore",
            Error::NoValidCounterfactuals => "NoValidCounterfactuals",
            Error::MixedClusters => "MixedClusters",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
        }
    }

    /// True for failures that concern one explanation request rather than
    /// the model or the inputs as a whole.
    pub fn is_query_failure(&self) -> bool {
        matches!(
            self,
            Error::InsufficientCores { .. }
                | Error::SearchSpaceTooLarge { .. }
                | Error::InfeasiblePlacement { .. }
                | Error::AlreadyInTarget(_)
                | Error::NoAdmissibleCore
                | Error::NoValidCounterfactuals
        )
    }
}
