use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A length-scale or rescaling factor collapsed to zero (e.g. all frames identical).
    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    /// An input row cannot be normalized or projected (all-zero row).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid kernel spec: {0}")]
    Spec(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("nothing left to evaluate after excluding background class {0}")]
    EmptyEval(i64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name of the failure class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Argument(_) => "argument",
            Error::DegenerateScale(_) => "degenerate-scale",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::Spec(_) => "spec",
            Error::Numeric(_) => "numeric",
            Error::Parse { .. } => "parse",
            Error::Consistency(_) => "consistency",
            Error::EmptyEval(_) => "empty-eval",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True for failures caused by reading or writing files rather than by the numbers in them.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Parse { .. } | Error::Json(_))
    }
}
