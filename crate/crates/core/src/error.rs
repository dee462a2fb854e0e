use thiserror::Error;

/// Errors raised by the filtering toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("contract: {0}")]
    Contract(String),

    #[error("{module}: integration failure at node {node}: {detail}")]
    Integration {
        module: &'static str,
        node: usize,
        detail: String,
    },

    #[error("{module}: numerical failure at node {node}: {detail}")]
    Numerical {
        module: &'static str,
        node: usize,
        detail: String,
    },

    #[error("linear: gamma is singular at node {node} (enable regularization)")]
    Singular { node: usize },

    #[error("expansion: closure overflow in generation pass {pass}: {count} terms exceed term cap {cap}")]
    ClosureOverflow {
        pass: usize,
        count: usize,
        cap: usize,
    },

    #[error("{what} {value} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Integration { .. }
                | Error::Numerical { .. }
                | Error::Singular { .. }
                | Error::ClosureOverflow { .. }
                | Error::CapExceeded { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
