use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("{what}: {detail}")]
    Domain { what: &'static str, detail: String },

    /// A caller broke a documented precondition (index range, vector length, ...).
    #[error("contract violation in {what}: {detail}")]
    Contract { what: &'static str, detail: String },

    /// An iterative solver exhausted its budget.
    #[error(
        "{what} did not converge after {iterations} iterations (last iterate {last}, residual {residual:e})"
    )]
    Convergence {
        what: &'static str,
        iterations: usize,
        last: f64,
        residual: f64,
    },

    /// Configuration that cannot be run (unstable step size, degenerate rates, ...).
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn contract(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Contract {
            what,
            detail: detail.into(),
        }
    }
}
