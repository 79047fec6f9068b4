use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh consistency: {0}")]
    InternalConsistency(String),

    #[error("invalid element order {order} for {space} (must be >= 1)")]
    InvalidOrder { space: &'static str, order: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("TC({alpha}, {beta}) not admissible for n = {n}: {reason}")]
    TcViolation { n: i32, alpha: f64, beta: f64, reason: String },

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("mass matrix factorization failed: {0}")]
    IllConditionedMass(String),

    #[error("eigensolver did not converge: {0}")]
    Iteration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("study error: {0}")]
    Study(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
