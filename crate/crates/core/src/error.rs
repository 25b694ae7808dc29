use thiserror::Error;

/// Errors produced by the library. Every variant maps onto one of the CLI
/// exit codes via [`FractalError::exit_code`].
#[derive(Debug, Error)]
pub enum FractalError {
    #[error("invalid IFS: {0}")]
    InvalidIfs(String),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("scale {0} is outside (0, 1)")]
    ScaleOutOfRange(f64),

    #[error("resource budget `{budget}` exceeded: limit {limit}, needed more")]
    ResourceExceeded { budget: &'static str, limit: u64 },

    #[error("inconsistent dimension profile: violated `{violated}` ({detail})")]
    InconsistentProfile { violated: String, detail: String },

    #[error("missing exponent: {0}")]
    MissingExponent(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("pushforward map has no Hessian bound; order-1 evaluation needs one")]
    MissingHessianBound,

    #[error("factor support is not contained in (0, inf): hull [{lo}, {hi}]")]
    SupportNotPositive { lo: f64, hi: f64 },

    #[error("projection centre ({a}, {b}) lies inside the support hulls")]
    CenterInsideSupport { a: f64, b: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, FractalError>;

impl FractalError {
    /// 0 ok, 2 config invalid, 3 inconsistent profile, 4 resource exceeded, 5 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            FractalError::InconsistentProfile { .. } => 3,
            FractalError::ResourceExceeded { .. } => 4,
            FractalError::Internal(_) => 5,
            _ => 2,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FractalError::InvalidIfs(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        FractalError::BadConfig(msg.into())
    }
}
