//! Error types shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A network failed structural validation (shapes, signs, self-obligations).
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    /// A caller-supplied argument is out of range or malformed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Balance-sheet calibration rejected the input data.
    #[error("calibration rejected: {0}")]
    Calibration(String),

    /// An inverse demand function failed construction-time validation.
    #[error("inverse demand rejected: {0}")]
    InverseDemand(String),

    /// A requested price cannot be produced by the inverse demand function.
    #[error("price not invertible: {0}")]
    PriceNotInvertible(String),

    /// The holdings fixed point did not converge within the iteration budget.
    #[error("holdings fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// The price fixed point did not converge within the iteration budget.
    #[error(
        "price fixed point did not converge after {iterations} iterations (residual {residual:e})"
    )]
    PriceNonConvergence { iterations: usize, residual: f64 },

    /// A Picard iterate moved against the configured lattice direction: the
    /// payment/utility rules violate the monotonicity hypotheses.
    #[error("monotone iteration contract violated: {0}")]
    MonotonicityViolation(String),

    /// The payment floor handed to the holdings solver exceeds the budget by
    /// more than rounding noise.
    #[error("holdings floor infeasible: floor value exceeds budget by {excess_rel:e} (relative)")]
    InfeasibleFloor { excess_rel: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
