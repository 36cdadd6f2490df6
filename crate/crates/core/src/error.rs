use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("hamiltonian failed validation: {0}")]
    Invalid(String),
    #[error("table resolution exhausted: {0}")]
    Resolution(String),
    #[error("locality violated: {0}")]
    Locality(String),
    #[error("degenerate stencil: {0}")]
    DegenerateStencil(String),
    #[error("empty level set: {0}")]
    Level(String),
    #[error("margin error: {0}")]
    Margin(String),
    #[error("rank-deficient quadratic fit: {0}")]
    Fit(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("precondition failed at node {node}: {detail}")]
    Precondition { node: usize, detail: String },
    #[error("csv parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
