//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid model parameter (names the violated constraint).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation too close to a pole or a zero of a denominator.
    /// `index` is the pole index when the singularity belongs to an
    /// indexed family (e.g. poles of a meromorphic transform).
    #[error("singularity near ({re}, {im}){}: {context}", index.map(|k| format!(" [pole index {k}]")).unwrap_or_default())]
    Singularity {
        re: f64,
        im: f64,
        index: Option<i64>,
        context: String,
    },

    /// A series or iteration failed to reach the requested tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// API misuse (wrong method/parameter combination).
    #[error("usage error: {0}")]
    Usage(String),

    /// Stochastic simulation produced a non-finite state.
    #[error("simulation error at step {step}: {message}")]
    Simulation { step: u64, message: String },

    /// A public operation would have returned NaN or infinity.
    #[error("non-finite result in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
