use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid offset: {0}")]
    InvalidOffset(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("unsupported medium kind: {0}")]
    UnsupportedKind(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(
        "conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})"
    )]
    Convergence { iterations: usize, residual: f64 },
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("bad format: expected {expected}, found {found}")]
    Format { expected: String, found: String },
    #[error("truncated input at byte {offset}: {context}")]
    Truncated { offset: usize, context: String },
    #[error("inconsistent input: {0}")]
    Consistency(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable category used in CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "invalid-spec",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Shape(_) => "shape",
            Error::InvalidOffset(_) => "invalid-offset",
            Error::InvalidPoint(_) => "invalid-point",
            Error::UnsupportedKind(_) => "unsupported-kind",
            Error::Solver(_) => "solver",
            Error::Convergence { .. } => "convergence",
            Error::Divergence { .. } => "divergence",
            Error::UndefinedMetric(_) => "undefined-metric",
            Error::EmptyInput(_) => "empty-input",
            Error::Degenerate(_) => "degenerate-input",
            Error::Format { .. } => "format",
            Error::Truncated { .. } => "truncated",
            Error::Consistency(_) => "consistency",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Solver(_)
                | Error::Convergence { .. }
                | Error::Divergence { .. }
                | Error::UndefinedMetric(_)
                | Error::Degenerate(_)
        )
    }
}
