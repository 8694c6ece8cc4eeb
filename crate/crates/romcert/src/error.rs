use thiserror::Error;

/// Library-wide error type. Variants carry enough context to be rendered as
/// machine-readable JSON by the command-line driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter {value:?} lies outside the admissible domain {domain}")]
    DomainViolation { value: Vec<f64>, domain: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("time integration failed at t = {t_last}: {reason}")]
    IntegrationFailure { t_last: f64, reason: String },

    #[error("matrix factorization failed: {0}")]
    SingularMatrix(String),

    #[error("linear system too ill-conditioned: estimated condition {cond:.3e} exceeds {limit:.3e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("time grids are incompatible: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("degenerate residual ratio at step {step}: corrected residual vanished while the auxiliary residual is {aux_norm:.3e}")]
    DegenerateRatio { step: usize, aux_norm: f64 },

    #[error("missing input for {0}")]
    MissingInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported model id {0:?}")]
    UnknownModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("artifact format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
