use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown rule `{0}`")]
    UnknownRule(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("polynomial degree {0} exceeds the supported maximum of {max}", max = crate::numerics::MAX_DEGREE)]
    DegreeTooLarge(usize),

    #[error("matrix dimension {0} exceeds the supported maximum of {max}", max = crate::numerics::MAX_DIM)]
    DimensionTooLarge(usize),

    #[error(
        "root finder did not converge after {iterations} iterations (max residual {residual:e})"
    )]
    RootsNotConverged { iterations: usize, residual: f64 },

    #[error("newton iteration failed: {0}")]
    NewtonFailed(String),

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("edge-end measure iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NuNotConverged { iterations: usize, residual: f64 },

    #[error("field evaluation outside its domain: {0}")]
    Domain(String),

    #[error("stationary branch lost at theta = {theta}: {reason}")]
    BranchLost { theta: f64, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical failures map to exit code 3, everything else to 2.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::RootsNotConverged { .. }
                | Error::NewtonFailed(_)
                | Error::NonFinite { .. }
                | Error::NuNotConverged { .. }
                | Error::Domain(_)
                | Error::BranchLost { .. }
        )
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_numeric() {
            3
        } else {
            2
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
