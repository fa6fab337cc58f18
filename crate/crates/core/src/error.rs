use thiserror::Error;

/// Errors produced anywhere in the detection / repair / evaluation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("backend does not support {0}")]
    Unsupported(String),

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("numeric error at {location}: {message}")]
    Numeric { location: String, message: String },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("remote error (status {status}, code {code}): {message}")]
    Remote { status: u16, code: String, message: String },

    #[error("all {count} repair candidates failed; first: {}", diagnostics.first().map(String::as_str).unwrap_or("none"))]
    CandidatesFailed { count: usize, diagnostics: Vec<String> },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn numeric(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numeric {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Attach the diffusion / training step at which this error surfaced.
    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input or configuration, as
    /// opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Domain(_) | Error::Shape { .. } | Error::Validation(_) | Error::Config(_) | Error::Parse { .. } => {
                true
            }
            Error::AtStep { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
