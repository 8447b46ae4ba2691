use thiserror::Error;

/// Errors raised by every layer of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("distributions live on different lattices")]
    LatticeMismatch,

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("sinkhorn did not converge after {iterations} iterations (marginal violation {violation:e})")]
    NonConvergence { iterations: usize, violation: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("covariance is not symmetric positive definite: {0}")]
    NonSpd(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("time step {dt:e} violates the stability bound {bound:e}")]
    StabilityViolation { dt: f64, bound: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    #[error("degenerate ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("design carries no strength information (sensitivity {0:e})")]
    InsensitiveDesign(f64),

    #[error("config validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::LatticeMismatch => "LatticeMismatch",
            Error::SupportViolation(_) => "SupportViolation",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::NonSpd(_) => "NonSPD",
            Error::Dimension(_) => "DimensionError",
            Error::StabilityViolation { .. } => "StabilityViolation",
            Error::NonFinite(_) => "NonFinite",
            Error::DegeneratePosterior(_) => "DegeneratePosterior",
            Error::DegenerateEnsemble(_) => "DegenerateEnsemble",
            Error::InsensitiveDesign(_) => "InsensitiveDesign",
            Error::Validation(_) => "ValidationError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
