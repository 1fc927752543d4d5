use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow in {0}")]
    Overflow(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("degenerate normalization: B(phi_hat) = {0} contains zero")]
    Degenerate(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("solver did not converge after {iterations} iterations (residuals {history:?})")]
    Convergence { iterations: usize, history: Vec<f64> },
    #[error("bracket error: {0}")]
    Bracket(String),
    #[error("construction error: {0}")]
    Construction(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
