use thiserror::Error;

/// Errors produced by stack I/O, analysis, and training routines.
///
/// `Io` wraps operating-system failures; every other variant means the
/// input itself (file bytes, argument values, shapes) was rejected.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// The byte stream does not match the expected container layout.
    #[error("format error: {0}")]
    Format(String),

    /// The container header promises more bytes than the file holds.
    #[error("truncated input: {0}")]
    Truncated(String),

    /// Valid container, but a feature this reader does not handle.
    #[error("unsupported feature: {0}")]
    Unsupported(String),

    /// An argument or structure violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// The requested arithmetic is undefined for these operands.
    #[error("domain error: {0}")]
    Domain(String),

    /// A regression was requested on data that cannot determine a line.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

impl Error {
    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn truncated(msg: impl Into<String>) -> Self {
        Error::Truncated(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateFit(msg.into())
    }

    /// True for every variant except `Io`. Callers that map errors onto
    /// process exit codes treat these as bad input rather than bad disk.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
