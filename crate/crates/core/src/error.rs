use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size limit exceeded: {what} = {value} (maximum {max})")]
    Size {
        what: &'static str,
        value: u64,
        max: u64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("integration failed at t = {t}: step size {step:e} underflowed ({detail})")]
    Integration { t: f64, step: f64, detail: String },

    #[error("quadrature did not converge after {nodes} nodes (last change {change:e})")]
    Quadrature { nodes: usize, change: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}
