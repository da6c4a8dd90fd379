use thiserror::Error;

/// Which factor of a rank-one term carries the offending tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermSide {
    Left,
    Right,
}

impl std::fmt::Display for TermSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TermSide::Left => f.write_str("left"),
            TermSide::Right => f.write_str("right"),
        }
    }
}

/// Reasons an operator description does not define a bounded operator of the
/// representable class. Only produced at construction or parse time.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpValidationError {
    #[error("rank-one term {term}: {side} factor has a tail that is not square-summable, the operator is unbounded")]
    UnboundedTail { term: usize, side: TermSide },
    #[error("malformed block: {0}")]
    MalformedBlock(String),
    #[error("ambient mismatch: {0}")]
    AmbientMismatch(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("sequence is not square-summable")]
    NotSquareSummable,
    #[error("series did not reach tolerance {tol:e} within {terms} terms")]
    SeriesBudget { tol: f64, terms: usize },
    #[error(transparent)]
    Validation(#[from] OpValidationError),
    #[error(
        "rank decision is ambiguous at the requested tolerance (condition estimate {condition:e})"
    )]
    DegenerateTolerance { condition: f64 },
    #[error("eigenvalue computation failed: {0}")]
    EigenFailure(String),
    #[error("{0} is not an eigenvalue of the operator")]
    UnknownEigenvalue(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed operator file at line {line}, column {column}: {message}")]
    MalformedFile {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable variant name, used in CLI messages and the C interface.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquareSummable => "NotSquareSummable",
            Error::SeriesBudget { .. } => "SeriesBudget",
            Error::Validation(OpValidationError::UnboundedTail { .. }) => "UnboundedTail",
            Error::Validation(OpValidationError::MalformedBlock(_)) => "MalformedBlock",
            Error::Validation(OpValidationError::AmbientMismatch(_)) => "AmbientMismatch",
            Error::DegenerateTolerance { .. } => "DegenerateTolerance",
            Error::EigenFailure(_) => "EigenFailure",
            Error::UnknownEigenvalue(_) => "UnknownEigenvalue",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::MalformedFile { .. } => "MalformedFile",
            Error::Io(_) => "Io",
        }
    }

    /// Whether the error comes from the input (file, arguments) rather than
    /// from a numerical decision on a valid operator.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::InvalidArgument(_)
                | Error::MalformedFile { .. }
                | Error::Io(_)
        )
    }
}
