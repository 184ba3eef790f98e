use thiserror::Error;

use crate::quadrature::QuadratureResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A model input or function argument is outside its domain.
    #[error("{field}: {message}")]
    Domain {
        field: &'static str,
        message: String,
    },

    /// β = 1 has no mass at the origin and is excluded from the model.
    #[error("beta must be < 1 (beta = 1 never reaches zero), got {0}")]
    BetaOne(f64),

    /// The Bessel series of the density did not settle within the term cap.
    #[error("density series not converged after {terms} terms (last term {last_term:e})")]
    Truncation { terms: usize, last_term: f64 },

    /// Adaptive quadrature ran out of levels; the partial result is attached.
    #[error("quadrature did not converge: value {} with error estimate {}", .0.raw_value, .0.abs_err)]
    NonConvergence(Box<QuadratureResult>),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(field: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            field,
            message: message.into(),
        }
    }
}
