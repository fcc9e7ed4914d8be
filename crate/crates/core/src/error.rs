use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("duplicate locations at indices {0} and {1}")]
    DuplicateLocation(usize, usize),

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("input order violated: {0}")]
    InputOrder(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("requested limit does not exist: regime is {0}")]
    Regime(String),

    #[error("optimizer did not converge after {iterations} iterations (best objective {best_value})")]
    Convergence {
        iterations: usize,
        best_value: f64,
        best_point: Vec<f64>,
    },

    #[error("degenerate column {0}: zero variance")]
    DegenerateColumn(usize),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
