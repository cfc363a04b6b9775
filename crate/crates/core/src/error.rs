use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition failed: {message} (achieved coverage {coverage:.4})")]
    Precondition { message: String, coverage: f64 },

    #[error("no node passed causality screening ({dropped} dropped)")]
    NoCausalNodes { dropped: usize },

    #[error("pole: {0}")]
    Pole(String),

    #[error("causality breakdown at Schur step {step}: |phi| - 1 = {excess:e}")]
    CausalityBreakdown { step: usize, excess: f64 },

    #[error("evaluation pole at omega = {omega}: {message}")]
    EvaluationPole { omega: f64, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("oracle quadrature did not converge (achieved relative error {achieved:e})")]
    Oracle { achieved: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
