use thiserror::Error;

/// Errors raised by the numerical layers and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("regressor matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("hyper-parameter outside the feasible domain: {0}")]
    DomainViolation(String),

    #[error("hyper-parameter index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("reference denominator is degenerate ({0:.3e})")]
    DegenerateReference(f64),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("no start point produced a finite cost")]
    NoFiniteCost,

    #[error("hessian of the limit cost is numerically singular")]
    SingularHessian,

    #[error("sweep needs at least {needed} levels, got {got}")]
    InsufficientSweep { needed: usize, got: usize },

    #[error("need at least {needed} replicates, got {got}")]
    InsufficientReplicates { needed: usize, got: usize },

    #[error("missing oracle input: {0}")]
    MissingOracle(&'static str),

    #[error("experiment failed: {failed} of {total} replicates failed")]
    ExperimentFailed { failed: usize, total: usize },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error in {what}: {reason}")]
    Parse { what: String, reason: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            reason: reason.to_string(),
        }
    }

    /// Short machine-readable code used in record files for failed replicates.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "not_pd",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::DimensionMismatch(_) => "dimension",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::RankDeficient(_) => "rank_deficient",
            Error::DomainViolation(_) => "domain",
            Error::IndexOutOfRange { .. } => "index",
            Error::DegenerateReference(_) => "degenerate_reference",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::NoFiniteCost => "no_finite_cost",
            Error::SingularHessian => "singular_hessian",
            Error::InsufficientSweep { .. } => "insufficient_sweep",
            Error::InsufficientReplicates { .. } => "insufficient_replicates",
            Error::MissingOracle(_) => "missing_oracle",
            Error::ExperimentFailed { .. } => "experiment_failed",
            Error::Io(_) => "io",
            Error::Parse { .. } => "parse",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
