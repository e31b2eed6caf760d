use thiserror::Error;

/// Errors raised by the numerical engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrontierError {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An adaptive routine exhausted its evaluation budget.
    #[error("no convergence after {evaluations} evaluations (estimate {estimate}, error {abs_error})")]
    NonConvergence {
        estimate: f64,
        abs_error: f64,
        evaluations: usize,
    },
    /// The input is too small or degenerate for the requested statistic.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// A noise draw was used with an incompatible grid or index.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, FrontierError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(FrontierError::Domain(msg.into()))
}
