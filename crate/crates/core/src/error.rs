use num_complex::Complex64;
use thiserror::Error;

/// Errors raised across the library. Each variant maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric failure: {context} (condition estimate {condition:.3e})")]
    NumericFailure { context: String, condition: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("insufficient excitation: rank [X0; U0] = {rank}, required {required}")]
    DataRank { rank: usize, required: usize },
    #[error("trivial nullspace of X1 - lambda X0 for lambda = {pole}; data inconsistent with a controllable linear system")]
    NullspaceEmpty { pole: Complex64 },
    #[error("column selection reached rank {achieved} of {required} for X0 M after exhausting redraws")]
    RankSelection { achieved: usize, required: usize },
    #[error("pole {pole} has multiplicity {multiplicity} exceeding the input dimension {inputs}")]
    Multiplicity {
        pole: Complex64,
        multiplicity: usize,
        inputs: usize,
    },
    #[error("eigenvector {index} is not assignable (least-squares residual {residual:.3e})")]
    InfeasibleEigenvector { index: usize, residual: f64 },
    #[error("infeasible eigenstructure: {0}")]
    Infeasible(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("data does not identify the model: rank [X0; U0] = {rank}, required {required}")]
    Unidentifiable { rank: usize, required: usize },
    #[error("system is not controllable (controllability rank {rank} < {n})")]
    Uncontrollable { rank: usize, n: usize },
    #[error("random system generation failed after {attempts} draws")]
    GenerationFailure { attempts: usize },
    #[error("no records to emit")]
    EmptyRecords,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 1 usage, 2 infeasible, 3 insufficient data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::InvalidArgument(_)
            | Error::EmptyRecords
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 1,
            Error::Infeasible(_)
            | Error::InfeasibleEigenvector { .. }
            | Error::Multiplicity { .. }
            | Error::Precondition(_)
            | Error::Uncontrollable { .. } => 2,
            Error::DataRank { .. } | Error::Unidentifiable { .. } | Error::NullspaceEmpty { .. } => 3,
            Error::NumericFailure { .. }
            | Error::Unsupported(_)
            | Error::RankSelection { .. }
            | Error::GenerationFailure { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
