use thiserror::Error;

use crate::solver::NumericalFailure;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("diagonal entry a[{node}][{node}] = {value} is not positive")]
    NonPositiveDiagonal { node: usize, value: f64 },

    #[error("diagonal entry a[{node}][{node}] is zero")]
    ZeroDiagonal { node: usize },

    #[error("invalid scaling: {0}")]
    InvalidScaling(String),

    #[error("matrix is numerically singular (pivot column {column})")]
    SingularMatrix { column: usize },

    #[error("system is not weakly D-scaled diagonally dominant under the given scaling")]
    NotWeaklyDominant,

    #[error("system is not generalised diagonally dominant (spectral radius {rho})")]
    NotGeneralizedDD { rho: f64 },

    #[error("non-positive Lambda on edge {from}->{to} at level {level}: {value}")]
    NonPositiveLambda {
        from: usize,
        to: usize,
        level: usize,
        value: f64,
    },

    #[error("rate fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("unwrapped tree would exceed {limit} nodes")]
    TreeTooLarge { limit: usize },

    #[error("node {node} out of range for n = {n}")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing diagonal entry in row {row}")]
    MissingDiagonal { row: usize },

    #[error("matrix is not square ({rows} x {cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("instance generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Numerical(#[from] NumericalFailure),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotWeaklyDominant
            | Error::NotGeneralizedDD { .. }
            | Error::NonPositiveDiagonal { .. }
            | Error::ZeroDiagonal { .. } => 4,
            Error::SingularMatrix { .. }
            | Error::NonPositiveLambda { .. }
            | Error::DegenerateFit(_)
            | Error::Numerical(_)
            | Error::TreeTooLarge { .. } => 3,
            _ => 2,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSystem(_) => "invalid_system",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonPositiveDiagonal { .. } => "non_positive_diagonal",
            Error::ZeroDiagonal { .. } => "zero_diagonal",
            Error::InvalidScaling(_) => "invalid_scaling",
            Error::SingularMatrix { .. } => "singular_matrix",
            Error::NotWeaklyDominant => "not_weakly_dominant",
            Error::NotGeneralizedDD { .. } => "not_generalized_dd",
            Error::NonPositiveLambda { .. } => "non_positive_lambda",
            Error::DegenerateFit(_) => "degenerate_fit",
            Error::TreeTooLarge { .. } => "tree_too_large",
            Error::NodeOutOfRange { .. } => "node_out_of_range",
            Error::Parse { .. } => "parse_error",
            Error::MissingDiagonal { .. } => "missing_diagonal",
            Error::NonSquare { .. } => "non_square",
            Error::GenerationFailed { .. } => "generation_failed",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Numerical(_) => "numerical_failure",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
