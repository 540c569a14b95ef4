//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("stale refinement directive: element {element} is not active")]
    StaleDirective { element: usize },

    #[error("coefficient error: {0}")]
    Coefficient(String),

    #[error("invalid estimator parameters: {0}")]
    Parameter(String),

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations (target {target:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("mesh hierarchy error: {0}")]
    Hierarchy(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
