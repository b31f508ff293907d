use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong in this crate.
///
/// Variants are grouped by class; [`Error::class`] maps each onto the coarse
/// category used for process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scenario file: {0}")]
    Parse(String),

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("quadrature did not converge: {what} (achieved error estimate {achieved:.3e}, requested {requested:.3e})")]
    NonConvergence {
        what: String,
        achieved: f64,
        requested: f64,
    },

    #[error("moment of order {order} diverges: profile decays too slowly")]
    MomentDivergence { order: usize },

    #[error("spectral differentiation of order {order} is dominated by grid noise")]
    NoisyTrack { order: usize },

    #[error("derivative of order {requested} unavailable (moment series holds up to {available})")]
    DerivativeOrder { requested: usize, available: usize },

    #[error("coverage: {0}")]
    Coverage(String),

    #[error("scenario has no velocity profile")]
    NoVelocityProfile,

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("singular discretization: {0}")]
    Singular(String),

    #[error("fit failed: {0}")]
    Fit(String),
}

/// Coarse error category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Usage,
    Validation,
    Numerical,
    Coverage,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Parse(_) | Error::Validation(_) => ErrorClass::Validation,
            Error::MissingInput(_) | Error::NoVelocityProfile => ErrorClass::Usage,
            Error::Coverage(_) => ErrorClass::Coverage,
            Error::NonConvergence { .. }
            | Error::MomentDivergence { .. }
            | Error::NoisyTrack { .. }
            | Error::DerivativeOrder { .. }
            | Error::Singular(_)
            | Error::Fit(_) => ErrorClass::Numerical,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
