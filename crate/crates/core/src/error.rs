use nalgebra::DVector;
use thiserror::Error;

/// Errors raised by the fitting, identification and inference routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("column {0} is constant and cannot be standardized")]
    ConstantColumn(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("complete or quasi-complete separation detected (|gamma| exceeded {limit})")]
    SeparationDetected { limit: f64 },

    #[error("information matrix is not positive definite")]
    SingularInformation,

    #[error("linear predictor {0} overflows the exponential mean")]
    Overflow(f64),

    #[error("coordinate descent did not converge after {sweeps} sweeps")]
    NoConvergence { beta: DVector<f64>, sweeps: usize },

    #[error("degenerate selection-probability denominator for covariate {0}")]
    DegenerateDenominator(usize),

    #[error("de-biasing system is singular")]
    SingularSystem,

    #[error("covariate {0} is not in the active set")]
    NotActive(usize),

    #[error("{failed} of {total} bootstrap replicates failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("tuning failed: {0}")]
    TuningFailed(String),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::ConstantColumn(_)
                | Error::DimensionMismatch(_)
                | Error::InvalidData(_)
                | Error::InvalidArgument(_)
        )
    }

    /// Short stable tag, used to bucket failures in simulation reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ConstantColumn(_) => "constant_column",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidData(_) => "invalid_data",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::SeparationDetected { .. } => "separation",
            Error::SingularInformation => "singular_information",
            Error::Overflow(_) => "overflow",
            Error::NoConvergence { .. } => "no_convergence",
            Error::DegenerateDenominator(_) => "degenerate_denominator",
            Error::SingularSystem => "singular_system",
            Error::NotActive(_) => "not_active",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::TuningFailed(_) => "tuning_failed",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
