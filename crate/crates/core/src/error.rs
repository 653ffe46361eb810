use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An instance, unit or loss model violates a structural invariant.
    /// `path` names the offending field, e.g. `units[2].prohibited_zones[1]`.
    #[error("invalid {path}: {message}")]
    Validation { path: String, message: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("instance has no loss model")]
    MissingLossModel,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("LP contains binary variable `{0}`; relax it first")]
    BinaryInLp(String),

    #[error("LP relaxation is unbounded")]
    Unbounded,

    #[error("LP iteration limit reached after {0} pivots")]
    IterationLimit(usize),

    /// The dispatch problem has no feasible schedule.
    #[error("dispatch infeasible: {diagnosis}")]
    Infeasible { diagnosis: String },

    /// A time or node limit stopped the search before any feasible schedule was found.
    #[error("no feasible schedule found before the limit ({nodes} nodes explored)")]
    NoIncumbent { nodes: usize },

    /// An inner MILP of the iterative loop was infeasible.
    #[error("MILP at iteration k={k} is infeasible")]
    IterationInfeasible { k: usize },

    #[error("enumeration space of {size} assignments exceeds the cap of {cap}")]
    EnumerationCap { size: u128, cap: u128 },

    #[error("oracle precondition failed: {0}")]
    OraclePrecondition(String),

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by malformed input rather than by the solve.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::DimensionMismatch { .. }
                | Error::MissingLossModel
                | Error::Parse(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
