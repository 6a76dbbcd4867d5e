use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid effect: {0}")]
    InvalidEffect(String),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("requested {requested_bytes} bytes exceeds the memory budget of {budget_bytes} bytes")]
    ResourceLimit {
        requested_bytes: u128,
        budget_bytes: u128,
    },

    #[error("singular information: {0}")]
    SingularInformation(String),

    #[error("unbounded variance: Fisher matrix has {} null direction(s)", null_directions.len())]
    UnboundedVariance { null_directions: Vec<Vec<f64>> },

    #[error("unidentifiable parameter: {0}")]
    Unidentifiable(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{failed} of {total} Monte Carlo trials failed (limit is 1%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("spec error: {0}")]
    Spec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short tag used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidState(_) => "invalid_state",
            Error::InvalidEffect(_) => "invalid_effect",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::ResourceLimit { .. } => "resource_limit",
            Error::SingularInformation(_) => "singular_information",
            Error::UnboundedVariance { .. } => "unbounded_variance",
            Error::Unidentifiable(_) => "unidentifiable",
            Error::SingularMatrix(_) => "singular_matrix",
            Error::Structure(_) => "structure",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidModel(_) => "invalid_model",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::Spec(_) => "spec",
            Error::Io(_) => "io",
        }
    }
}
