use thiserror::Error;

/// Crate-wide error type. Variants are grouped by what the caller can do
/// about them: `Config` means a bad parameter or config file, `Data` means
/// the inputs cannot support the requested operation, `Parse` points at a
/// malformed file line, and the rest are runtime failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: String,
        expected: String,
        got: String,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("run failure: {0}")]
    Run(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn shape(what: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            what: what.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI: 2 for config problems, 3 for data and
    /// file-format problems, 4 for anything that failed at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Parse { .. } => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
